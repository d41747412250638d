#pragma once

#include "capr/capacity.hpp"
#include "capr/geometry.hpp"

#include <map>
#include <memory>
#include <vector>

namespace capr {

enum class ObstacleRule {
  sampled,        ///< largest complement piece per cube, sampled and solved
  analytic_balls  ///< ball pieces inside their cube use the closed-form potential
};

struct CertificateConfig {
  double M = 1.0;               ///< cube half-period
  int shells = 4;               ///< Lambda
  double exponent_scale = 4.0;  ///< s in exp(-s / (delta p))
  ObstacleRule rule = ObstacleRule::sampled;
  int obstacle_budget = 300;
  bool margin_cubes = true;     ///< also place obstacles in cubes within Lambda of the box
  double probe_spacing = 0.0;   ///< 0 picks M / 4
  std::uint64_t seed = kDefaultSeed;
};

/// K_m inside the cube Q(2 M m, 2 M) with its equilibrium potential p_m.
struct Obstacle {
  Index3 cube{};
  bool analytic = false;
  Vec3 center = Vec3::Zero();  ///< analytic ball
  double radius = 0.0;
  DiscreteMeasure measure;     ///< sampled equilibrium measure
  double capacity = 0.0;

  double potential(const Vec3& x) const;
  Vec3 gradient(const Vec3& x) const;
  /// Distance from x to the support, less two patch radii (analytic: |x - c| - r).
  double clearance(const Vec3& x) const;
};

struct ObstacleSet {
  double M = 1.0;
  std::vector<Obstacle> obstacles;
  double delta = 0.0;           ///< half the smallest obstacle capacity
  double min_capacity = 0.0;
  int required_cubes = 0;       ///< cubes meeting the bounding box
  int margin_cubes = 0;         ///< outer cubes that received an obstacle
};

/// Picks K_m per cube. Throws ErrorKind::m_too_small when a cube meeting the
/// bounding box has complement capacity below 1e-6.
ObstacleSet select_obstacles(const Scene& scene, const CertificateConfig& config);

/// Omitted-shell bound: sum over lambda > Lambda of
/// ((2 lambda + 1)^n - (2 lambda - 1)^n) exp(-(s / delta) (2 (lambda - 1) M)^(n-2)).
double shell_tail_bound(int shells, double M, double delta, double exponent_scale, int n = 3);

/// phi(x) = sum over cubes m with |m - m(x)|_inf <= Lambda of exp(-s / (delta p_m(x))).
class SubharmonicCertificate {
public:
  SubharmonicCertificate(CertificateConfig config, ObstacleSet obstacles);

  double phi(const Vec3& x) const;
  Vec3 gradient(const Vec3& x) const;
  /// Sum of the per-term closed forms T (a / p^3)(a / p - 2)|grad p|^2, a = s / delta.
  double laplacian(const Vec3& x) const;
  /// Smallest per-term Laplacian at x.
  double min_term_laplacian(const Vec3& x) const;
  /// True when x keeps clear of every obstacle support.
  bool probe_valid(const Vec3& x, double margin) const;

  const CertificateConfig& config() const { return config_; }
  const ObstacleSet& obstacles() const { return set_; }
  double delta() const { return set_.delta; }

  double lower_bound_m = 0.0;
  double upper_bound_M_phi = 0.0;
  double truncation_tail = 0.0;
  std::size_t probe_count = 0;

private:
  template <class F>
  void for_each_term(const Vec3& x, F&& f) const;

  CertificateConfig config_;
  ObstacleSet set_;
  std::map<Index3, std::size_t> by_cube_;
};

/// Builds phi, its tail bound, and m <= phi <= M_phi from a probe sweep over
/// the scene's grid at the configured probe spacing.
SubharmonicCertificate build_phi(const Scene& scene, ObstacleSet obstacles,
                                 const CertificateConfig& config);

struct FloorReport {
  double c = 0.0;                ///< min analytic Laplacian over valid probes
  double c_fd = 0.0;             ///< min finite-difference Laplacian over the same probes
  double max_relative_gap = 0.0; ///< analytic vs finite differences
  bool agree = false;            ///< gap within 5% everywhere
  bool terms_nonnegative = true;
  std::size_t valid_probes = 0;
};

/// Throws ErrorKind::certificate_failed if the analytic floor is not positive.
FloorReport laplacian_floor(const SubharmonicCertificate& cert, const std::vector<Vec3>& probes,
                            double fd_step = 0.0);

/// Interior grid nodes of the scene that keep clear of the obstacles.
std::vector<Vec3> certificate_probes(const Scene& scene, const SubharmonicCertificate& cert,
                                     double spacing);

struct LowerBounds {
  double hormander = 0.0;  ///< c exp(m - M_phi)
  double lee = 0.0;        ///< c / (M~ - m), M~ = M_phi (1 + 1e-6)
  bool lee_dominates = false;
};

/// Throws ErrorKind::zero_oscillation when M_phi == m.
LowerBounds lambda1_lower_bounds(double c, double m, double M_phi);

class ScalarField {
public:
  virtual ~ScalarField() = default;
  virtual double value(const Vec3& x) const = 0;
  virtual Vec3 gradient(const Vec3& x) const = 0;
  virtual double laplacian(const Vec3& x) const = 0;
};

class CertificateField : public ScalarField {
public:
  explicit CertificateField(const SubharmonicCertificate& cert) : cert_(cert) {}
  double value(const Vec3& x) const override { return cert_.phi(x); }
  Vec3 gradient(const Vec3& x) const override { return cert_.gradient(x); }
  double laplacian(const Vec3& x) const override { return cert_.laplacian(x); }

private:
  const SubharmonicCertificate& cert_;
};

/// offset + sum_i k_i (x_i - c_i)^2.
class QuadraticField : public ScalarField {
public:
  QuadraticField(Vec3 center, Vec3 coefficients, double offset)
      : c_(center), k_(coefficients), offset_(offset) {}
  double value(const Vec3& x) const override;
  Vec3 gradient(const Vec3& x) const override;
  double laplacian(const Vec3&) const override { return 2.0 * k_.sum(); }

private:
  Vec3 c_, k_;
  double offset_;
};

class ConstantField : public ScalarField {
public:
  explicit ConstantField(double v) : v_(v) {}
  double value(const Vec3&) const override { return v_; }
  Vec3 gradient(const Vec3&) const override { return Vec3::Zero(); }
  double laplacian(const Vec3&) const override { return 0.0; }

private:
  double v_;
};

/// cos(pi x_1 / (2 L)) on the slab |x_1| < L.
class SlabCosineField : public ScalarField {
public:
  explicit SlabCosineField(double half_width) : L_(half_width) {}
  double value(const Vec3& x) const override;
  Vec3 gradient(const Vec3& x) const override;
  double laplacian(const Vec3& x) const override;
  double half_width() const { return L_; }

private:
  double L_;
};

/// Product of standard bumps exp(1 - 1/(1 - t^2)) on a box.
struct Bump {
  Vec3 center = Vec3::Zero();
  Vec3 half_width = Vec3::Ones();
  double amplitude = 1.0;

  double value(const Vec3& x) const;
  Vec3 gradient(const Vec3& x) const;
  AxisBox support() const { return {center - half_width, center + half_width}; }
};

/// Seeded bumps with supports inside `region`; widths in [min_width, max_width].
std::vector<Bump> random_bumps(int count, const AxisBox& region, double min_width,
                               double max_width, std::uint64_t seed);

struct IntegralRecord {
  Bump bump;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

struct IntegralReport {
  std::vector<IntegralRecord> records;
  int passed() const;
  bool pass() const { return !records.empty() && passed() == int(records.size()); }
};

/// int Lap(phi) w^2 exp(phi - M) <= (1 + slack) int |grad w|^2 with M the max
/// of phi over the bump support, by midpoint quadrature on `nodes`^3 points.
IntegralReport verify_twisted_inequality(const ScalarField& phi, const std::vector<Bump>& bumps,
                                         int nodes = 48, double slack = 0.02);

/// int (w^2 Lap(phi) / phi + |grad w|^2) against int |grad w - w grad(phi) / phi|^2;
/// passes when the relative mismatch is below `tolerance`. Throws a
/// precondition error where phi <= 0 on a support.
IntegralReport verify_lee_identity(const ScalarField& phi, const std::vector<Bump>& bumps,
                                   int nodes = 48, double tolerance = 0.02);

}  // namespace capr
