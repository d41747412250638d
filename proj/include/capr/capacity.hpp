#pragma once

#include "capr/geometry.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace capr {

/// Newtonian kernel |x - y|^{2-n}. Throws ErrorKind::singular_kernel for x == y.
double kernel(const Vec3& x, const Vec3& y, int n);
double kernel_of_distance(double r, int n);

/// Probability weights on a CompactSample.
class DiscreteMeasure {
public:
  DiscreteMeasure() = default;
  /// Requires weights >= 0 and |sum - 1| <= 1e-12.
  DiscreteMeasure(CompactSample support, std::vector<double> weights);

  static DiscreteMeasure uniform(CompactSample support);

  const CompactSample& support() const { return support_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return weights_.size(); }

private:
  CompactSample support_;
  std::vector<double> weights_;
};

/// Dense quadrature matrix: off-diagonal |x_i - x_j|^{2-n}, diagonal a_i^{2-n}.
Eigen::MatrixXd kernel_matrix(const CompactSample& sample, int n);

/// sum_ij w_i w_j K_ij.
double energy(const DiscreteMeasure& m, int n);

/// Euclidean projection onto the probability simplex (sorted-threshold method).
/// Equal entries keep their index order.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

enum class Optimizer { projected_gradient, frank_wolfe };

struct EquilibriumOptions {
  double tol = 1e-8;             ///< relative energy decrease threshold
  int max_iterations = 100000;
  Optimizer optimizer = Optimizer::projected_gradient;
  bool record_history = false;
};

struct EquilibriumResult {
  DiscreteMeasure measure;
  double energy = 0.0;
  double capacity = 0.0;
  int iterations = 0;
  bool converged = false;
  bool empty_support = false;        ///< K had no nonpolar part; capacity is 0
  double max_simplex_violation = 0;  ///< max over iterations of |sum w - 1| and -min w
  std::vector<double> energy_history;
};

/// Minimizes the discrete energy over the probability simplex.
EquilibriumResult equilibrium(const CompactSample& K, int n,
                              const EquilibriumOptions& options = {});

/// p(x) = sum_i w_i max(|x - x_i|, a_i)^{2-n}: each point mass is smeared
/// over its patch sphere, matching the kernel diagonal.
double potential(const DiscreteMeasure& m, const Vec3& x, int n);
Vec3 potential_gradient(const DiscreteMeasure& m, const Vec3& x, int n);

/// A scaled potential x -> scale * p_mu(x).
class PotentialField {
public:
  PotentialField(DiscreteMeasure source, double scale, int n)
      : source_(std::move(source)), scale_(scale), n_(n) {}

  double operator()(const Vec3& x) const { return scale_ * potential(source_, x, n_); }
  Vec3 gradient(const Vec3& x) const { return scale_ * potential_gradient(source_, x, n_); }

  const DiscreteMeasure& source() const { return source_; }
  double scale() const { return scale_; }
  int dimension() const { return n_; }

private:
  DiscreteMeasure source_;
  double scale_;
  int n_;
};

/// g = p_mu / I(mu) for the equilibrium measure of K. Throws
/// ErrorKind::not_converged if the solve did not converge.
PotentialField normalized_potential(const CompactSample& K, int n,
                                    const EquilibriumOptions& options = {});

struct SubadditivityReport {
  double union_capacity = 0.0;
  std::vector<double> part_capacities;
  double sum_of_parts = 0.0;
  bool pass = false;  ///< cap(union) <= 1.02 * sum
};

SubadditivityReport capacity_subadditivity_check(const std::vector<CompactSample>& parts, int n,
                                                 const EquilibriumOptions& options = {});

/// Capacity of a region at budgets N and 4N.
struct CapacityTrend {
  int coarse_budget = 0;
  int fine_budget = 0;
  double coarse = 0.0;
  double fine = 0.0;
  bool polar_candidate = false;  ///< empty sample, or fine < coarse / 4
};

CapacityTrend capacity_trend(const SceneNode& region, int budget, int n,
                             const SampleOptions& sampling = {},
                             const EquilibriumOptions& options = {});

/// Capacity of the closure of `region` at one budget; 0 when the sample is empty.
double region_capacity(const SceneNode& region, int budget, int n,
                       const SampleOptions& sampling = {},
                       const EquilibriumOptions& options = {});

}  // namespace capr
