#pragma once

#include "capr/capacity.hpp"
#include "capr/geometry.hpp"

namespace capr {

struct EnvelopeOptions {
  double kappa = 8.0;
  int tau_candidates = 32;
  int rays_per_point = 14;
  double gradient_floor = 1e-3;  ///< min rho |grad u| accepted on the level set
  int capacity_budget = 2000;
  double shrink = 0.7;
  int max_shrinks = 12;
  std::uint64_t seed = kDefaultSeed;
};

struct EnvelopeResult {
  Scene scene;             ///< G = {f < tau}
  double tau = 0.0;
  double radius = 0.0;     ///< bump radius around each point of K
  double cap_k = 0.0;
  double cap_g = 0.0;
  double min_level_gradient = 0.0;  ///< min rho |grad u| on sampled level-set points
  int tau_tried = 0;
  int shrinks = 0;
};

/// Smoothly bounded open superset G of K with cap(closure G) <= cap(K) + eps.
/// Throws ErrorKind::envelope_failed when no regular tau is found among the
/// candidates or the capacity bound cannot be met.
EnvelopeResult smooth_envelope(const CompactSample& K, double eps,
                               const EnvelopeOptions& options = {});

/// Level-set samples of an envelope node found by bisection along rays from
/// its points. Returns min rho |grad u| over the samples (u the bump sum).
double envelope_level_gradient(const SceneNode& envelope, int rays_per_point);

}  // namespace capr
