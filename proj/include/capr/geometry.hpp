#pragma once

#include "capr/common.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace capr {

class SceneNode;
using NodePtr = std::shared_ptr<const SceneNode>;

enum class RadiusLaw {
  constant,           ///< every ball has the node radius
  inverse_index_norm  ///< ball at lattice index k has radius / |k|; k = 0 is skipped
};

/// Open ball |x - center| < radius.
struct BallNode {
  Vec3 center;
  double radius;
};

/// Open box lo < x < hi.
struct BoxNode {
  AxisBox box;
};

/// Open half space {x : normal . x < offset}; normal is stored unit length.
struct HalfspaceNode {
  Vec3 normal;
  double offset;
};

struct UnionNode {
  std::vector<NodePtr> children;
};

struct IntersectionNode {
  std::vector<NodePtr> children;
};

/// Open complement of the child's closure.
struct ComplementNode {
  NodePtr child;
};

/// Union of closed balls centred at offset + spacing * k, |spacing * k| <= truncation.
struct LatticeBallsNode {
  double spacing;
  double radius;
  double truncation;
  Vec3 offset = Vec3::Zero();
  RadiusLaw law = RadiusLaw::constant;

  double radius_at(const Index3& k) const;
  bool has_site(const Index3& k) const;
  Vec3 site(const Index3& k) const;
};

/// child minus a finite point set. Without a child the node is the point set
/// itself: a closed set with empty interior.
struct PuncturesNode {
  NodePtr child;
  std::vector<Vec3> points;
};

/// Smoothed union of two children with transition scale epsilon.
struct SmoothUnionNode {
  NodePtr first;
  NodePtr second;
  double epsilon;
};

/// Sublevel set {f < tau} of f = exp(-kappa * sum_i bump(|x - p_i| / radius_i)).
struct EnvelopeNode {
  std::vector<Vec3> points;
  std::vector<double> radii;
  double kappa;
  double tau;
};

class SceneNode {
public:
  using Variant = std::variant<BallNode, BoxNode, HalfspaceNode, UnionNode,
                               IntersectionNode, ComplementNode, LatticeBallsNode,
                               PuncturesNode, SmoothUnionNode, EnvelopeNode>;

  explicit SceneNode(Variant v);

  const Variant& data() const { return data_; }
  std::string type_name() const;

  /// Negative inside, positive outside. Exact for ball, box and half space;
  /// a conservative min/max composition for booleans. Punctures are ignored
  /// and a bare point set reports +infinity (it has no body).
  double signed_distance(const Vec3& x) const;

  /// Membership in the open set. Points within puncture_tol of a puncture
  /// are excluded.
  bool contains(const Vec3& x, double puncture_tol = 1e-12) const;

  /// Membership in the closure.
  bool closure_contains(const Vec3& x) const;

  /// Bounding box of the closure, if bounded.
  std::optional<AxisBox> bounds() const;

  /// Image under x -> scale * x + shift.
  NodePtr transformed(double scale, const Vec3& shift) const;

  void collect_punctures(std::vector<Vec3>& out) const;

  /// f = exp(-kappa * u) and its gradient for an envelope node.
  double envelope_value(const Vec3& x, Vec3* grad = nullptr) const;

  bool operator==(const SceneNode& other) const;

private:
  Variant data_;
  // Bucket index for envelope point lookups.
  struct EnvelopeIndex;
  std::shared_ptr<const EnvelopeIndex> envelope_index_;

  double envelope_u(const EnvelopeNode& e, const Vec3& x, Vec3* grad) const;
};

// Node factories. These validate size parameters.
NodePtr make_ball(const Vec3& center, double radius);
NodePtr make_box(const Vec3& lo, const Vec3& hi);
NodePtr make_halfspace(const Vec3& normal, double offset);
NodePtr make_union(std::vector<NodePtr> children);
NodePtr make_intersection(std::vector<NodePtr> children);
NodePtr make_complement(NodePtr child);
NodePtr make_lattice_balls(double spacing, double radius, double truncation,
                           const Vec3& offset = Vec3::Zero(),
                           RadiusLaw law = RadiusLaw::constant);
NodePtr make_punctures(NodePtr child, std::vector<Vec3> points);
NodePtr make_smooth_union(NodePtr first, NodePtr second, double epsilon);
NodePtr make_envelope(std::vector<Vec3> points, std::vector<double> radii,
                      double kappa, double tau);

/// Constructive description of an open set D in R^n.
struct Scene {
  int dimension = 3;
  AxisBox bounding_box;
  NodePtr root;

  bool contains(const Vec3& x, double puncture_tol = 1e-12) const {
    return root->contains(x, puncture_tol);
  }
  double signed_distance(const Vec3& x) const { return root->signed_distance(x); }
  std::vector<Vec3> punctures() const;

  /// rD + shift, with the bounding box mapped along.
  Scene transformed(double scale, const Vec3& shift) const;
  Scene scaled(double r) const { return transformed(r, Vec3::Zero()); }
  Scene translated(const Vec3& x) const { return transformed(1.0, x); }

  bool operator==(const Scene& o) const {
    return dimension == o.dimension && bounding_box == o.bounding_box &&
           *root == *o.root;
  }
};

/// Node lattice h * Z^3 restricted to the open bounding box.
struct Grid {
  Scene scene;
  double h = 0.0;
  Index3 first{};                   // lattice index of local node (0,0,0)
  std::array<std::int64_t, 3> dims{};
  std::vector<std::uint8_t> interior;   // node in D and not a puncture
  std::vector<std::uint8_t> punctured;  // node in D but on a puncture

  std::size_t node_count() const {
    return static_cast<std::size_t>(dims[0] * dims[1] * dims[2]);
  }
  std::size_t linear(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return static_cast<std::size_t>((k * dims[1] + j) * dims[0] + i);
  }
  Vec3 point(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return h * Vec3(double(first[0] + i), double(first[1] + j), double(first[2] + k));
  }
  Vec3 point(std::size_t linear_index) const;
  std::size_t interior_count() const;
};

/// Throws ErrorKind::grid_too_coarse when fewer than 8 nodes are interior.
Grid build_grid(const Scene& scene, double h);

/// Quadrature support for a compact set K.
class CompactSample {
public:
  CompactSample() = default;

  /// Validates distinct points and 0 < a_i <= half the nearest-neighbour distance.
  CompactSample(std::vector<Vec3> points, std::vector<double> patch_radius,
                std::string source);

  /// Patch radius rule: half the nearest-neighbour distance, capped at feature_size.
  static CompactSample with_default_radii(std::vector<Vec3> points,
                                          double feature_size, std::string source);

  const std::vector<Vec3>& points() const { return points_; }
  const std::vector<double>& patch_radius() const { return radius_; }
  const std::string& source() const { return source_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  double max_patch_radius() const;

  CompactSample transformed(double scale, const Vec3& shift) const;

  /// Concatenation; points closer than the merged patch rule allows are dropped.
  static CompactSample merged(const std::vector<CompactSample>& parts,
                              std::string source);

private:
  std::vector<Vec3> points_;
  std::vector<double> radius_;
  std::string source_;
};

struct SampleOptions {
  std::uint64_t seed = kDefaultSeed;
  std::optional<AxisBox> clip;  ///< required for unbounded regions
  double min_spacing = 0.0;     ///< 0 picks 1e-4 of the region extent
};

/// Discretizes the closure of `region`. Balls are sampled on their bounding
/// sphere with exactly `budget` points; other regions get projected lattice
/// points on the boundary plus a sparse body fill, at most `budget` points.
/// Throws ErrorKind::empty_compact_set when nothing of positive size remains.
CompactSample sample_compact(const SceneNode& region, int budget,
                             const SampleOptions& options = {});

/// Equal-area spiral points on the sphere, rotated by a seeded random rotation.
std::vector<Vec3> sphere_points(const Vec3& center, double radius, int count,
                                std::uint64_t seed);

/// Smooth bump chi_eps on [0, inf): chi(0) = 1, chi(t) = 0 for t >= eps^2.
double chi(double t, double eps);

struct DefiningFunctionPair {
  std::function<double(const Vec3&)> r1;
  std::function<double(const Vec3&)> r2;
  double epsilon;
};

double smooth_union_value(double r1, double r2, double eps);
double smooth_union(const DefiningFunctionPair& pair, const Vec3& x);

struct TransversalityReport {
  std::size_t samples = 0;
  double min_cross = 0.0;   ///< min |grad r1 x grad r2| over unit gradients
  bool near_tangent = false;
};

/// Samples {r1 = r2 = 0} inside `region` and measures how transversal the
/// two boundaries are. near_tangent is set below `threshold`.
TransversalityReport check_transversality(const DefiningFunctionPair& pair,
                                          const AxisBox& region, int resolution,
                                          double threshold = 0.05);

/// Closed cube with centre 2 M m and side 2 M.
AxisBox lattice_cube(double M, const Index3& m);

/// Index m of a cube Q(2 M m, 2 M) containing x.
Index3 cube_index(double M, const Vec3& x);

/// Central-difference gradient.
Vec3 numerical_gradient(const std::function<double(const Vec3&)>& f, const Vec3& x,
                        double step);

}  // namespace capr
