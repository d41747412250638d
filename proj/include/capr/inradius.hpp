#pragma once

#include "capr/capacity.hpp"
#include "capr/geometry.hpp"

#include <optional>
#include <vector>

namespace capr {

/// Largest distance from an interior node to the nearest non-interior node,
/// by an exact Euclidean distance transform. Punctured nodes count as
/// interior. Nodes outside the grid count as complement. 0 for an empty grid.
double classical_inradius(const Grid& grid);

struct InradiusOptions {
  std::vector<double> eps_ladder{1e-1, 1e-2, 1e-3, 1e-4};
  double h = 1.0 / 16.0;            ///< bisection resolution and grid spacing
  int capacity_budget = 400;
  int top_candidates = 4;
  int max_lattice_points = 64 * 64 * 64;
  std::uint64_t seed = kDefaultSeed;
  std::optional<AxisBox> center_box;  ///< defaults to the bounding box
};

struct RadiusPoint {
  double epsilon = 0.0;
  double radius = 0.0;
  Vec3 center = Vec3::Zero();
  double cap_at_witness = 0.0;
};

struct InradiusReport {
  double classical = 0.0;
  double frak_r = 0.0;          ///< capacity inradius estimate
  double frak_r_eps = 0.0;      ///< threshold used for it
  Vec3 frak_r_center = Vec3::Zero();
  std::vector<RadiusPoint> rho;  ///< R*(eps) along the ladder
  bool unbounded_candidate = false;  ///< no complement inside the bounding box
  double r_max = 0.0;

  /// R* at the smallest eps.
  double rho_estimate() const { return rho.empty() ? 0.0 : rho.back().radius; }
};

/// R*(eps): the largest R (to resolution h) such that some centre x has
/// cap(B(x,R) intersected with the complement of D) < eps.
InradiusReport strict_capacity_inradius(const Scene& scene, const InradiusOptions& options = {});

/// Largest R whose best intersection is empty, or has capacity below
/// eps_polar and shrinks more than 4x from budget N to 4N.
RadiusPoint capacity_inradius(const Scene& scene, double eps_polar,
                              const InradiusOptions& options = {});

/// Both estimators plus the classical inradius on the scene's grid.
InradiusReport inradius_report(const Scene& scene, double eps_polar,
                               const InradiusOptions& options = {});

struct UpperBoundReport {
  double lambda = 0.0;         ///< extrapolated lambda_1(D)
  double rho = 0.0;            ///< R* at the smallest eps
  double bound = 0.0;          ///< pi^2 / rho^2
  double ratio = 0.0;          ///< lambda / bound
  bool truncated = false;
  bool pass = false;           ///< lambda <= 1.05 bound
};

UpperBoundReport verify_upper_bound(const Scene& scene, double h,
                                    const InradiusOptions& options = {});

}  // namespace capr
