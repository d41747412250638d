#include "capr/envelope.hpp"

#include <algorithm>
#include <cmath>

namespace capr {

namespace {

std::vector<Vec3> ray_directions(int count) {
  std::vector<Vec3> dirs;
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    dirs.emplace_back(r * std::cos(golden * i), r * std::sin(golden * i), z);
  }
  return dirs;
}

}  // namespace

double envelope_level_gradient(const SceneNode& node, int rays_per_point) {
  const auto& e = std::get<EnvelopeNode>(node.data());
  double worst = std::numeric_limits<double>::infinity();
  const auto dirs = ray_directions(rays_per_point);
  for (std::size_t i = 0; i < e.points.size(); ++i) {
    const double rho = e.radii[i];
    for (const Vec3& d : dirs) {
      // f rises from below tau at the point to 1 outside all supports.
      double lo = 0.0, hi = rho;
      bool found = false;
      const int steps = 32;
      for (int s = 1; s <= steps; ++s) {
        const double t = 2.0 * rho * s / steps;
        if (node.envelope_value(e.points[i] + t * d) >= e.tau) {
          lo = 2.0 * rho * (s - 1) / steps;
          hi = t;
          found = true;
          break;
        }
      }
      if (!found) continue;
      for (int k = 0; k < 50; ++k) {
        const double mid = 0.5 * (lo + hi);
        (node.envelope_value(e.points[i] + mid * d) < e.tau ? lo : hi) = mid;
      }
      Vec3 g;
      const double f = node.envelope_value(e.points[i] + hi * d, &g);
      // |grad f| = kappa f |grad u|
      worst = std::min(worst, rho * g.norm() / (e.kappa * f));
    }
  }
  return worst;
}

EnvelopeResult smooth_envelope(const CompactSample& K, double eps, const EnvelopeOptions& opt) {
  require(eps > 0.0, "eps must be positive");
  require(!K.empty(), "envelope needs a nonempty sample");
  require(opt.tau_candidates >= 1, "need at least one tau candidate");

  EnvelopeResult out;
  out.cap_k = equilibrium(K, 3).capacity;

  std::vector<double> taus;
  for (int k = 0; k < opt.tau_candidates; ++k) {
    const int step = (k + 1) / 2;
    const double off = (k % 2 == 1 ? 1.0 : -1.0) * step / (2.0 * opt.tau_candidates + 2.0);
    taus.push_back(0.5 + (k == 0 ? 0.0 : off));
  }

  double rho = 2.0 * K.max_patch_radius();
  for (int shrink = 0; shrink <= opt.max_shrinks; ++shrink, rho *= opt.shrink) {
    std::vector<double> radii(K.size(), rho);
    NodePtr g;
    double grad = 0.0;
    int tried = 0;
    for (double tau : taus) {
      ++tried;
      NodePtr cand = make_envelope(K.points(), radii, opt.kappa, tau);
      bool covers = true;
      for (const auto& p : K.points())
        if (!(cand->envelope_value(p) < tau)) covers = false;
      if (!covers) continue;
      grad = envelope_level_gradient(*cand, opt.rays_per_point);
      if (std::isfinite(grad) && grad >= opt.gradient_floor) {
        g = cand;
        out.tau = tau;
        break;
      }
    }
    out.tau_tried = tried;
    if (!g) throw Error(ErrorKind::envelope_failed, "envelope failed: no regular value of f");

    const CompactSample S = sample_compact(*g, opt.capacity_budget, SampleOptions{opt.seed, {}, {}});
    const double cap_g = equilibrium(S, 3).capacity;
    out.radius = rho;
    out.cap_g = cap_g;
    out.min_level_gradient = grad;
    out.shrinks = shrink;
    if (cap_g <= out.cap_k + eps) {
      const AxisBox b = *g->bounds();
      out.scene.dimension = 3;
      out.scene.bounding_box = b.inflated(0.1 * b.extent().maxCoeff());
      out.scene.root = g;
      return out;
    }
  }
  throw Error(ErrorKind::envelope_failed, "envelope failed: capacity bound not met");
}

}  // namespace capr
