#include "capr/inradius.hpp"

#include "capr/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace capr {

namespace {

constexpr double kFar = 1e20;

// 1D squared distance transform: lower envelope of parabolas rooted at f.
void distance_transform_1d(std::vector<double>& f) {
  const std::size_t n = f.size();
  std::vector<double> d(n), z(n + 1);
  std::vector<std::size_t> v(n, 0);
  std::size_t k = 0;
  z[0] = -kFar;
  z[1] = kFar;
  for (std::size_t q = 1; q < n; ++q) {
    double s;
    while (true) {
      const double p = double(v[k]);
      s = ((f[q] + double(q) * double(q)) - (f[v[k]] + p * p)) / (2.0 * (double(q) - p));
      if (s > z[k] || k == 0) break;
      --k;
    }
    if (s <= z[k]) {
      v[k] = q;
      z[k + 1] = kFar;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kFar;
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[k + 1] < double(q)) ++k;
    const double dq = double(q) - double(v[k]);
    d[q] = dq * dq + f[v[k]];
  }
  f = std::move(d);
}

}  // namespace

double classical_inradius(const Grid& g) {
  // Pad by one complement layer on every side.
  const std::int64_t nx = g.dims[0] + 2, ny = g.dims[1] + 2, nz = g.dims[2] + 2;
  const double inf = kFar;
  std::vector<double> f(static_cast<std::size_t>(nx * ny * nz), 0.0);
  const auto at = [&](std::int64_t i, std::int64_t j, std::int64_t k) -> double& {
    return f[static_cast<std::size_t>((k * ny + j) * nx + i)];
  };
  bool any = false;
  for (std::int64_t k = 0; k < g.dims[2]; ++k)
    for (std::int64_t j = 0; j < g.dims[1]; ++j)
      for (std::int64_t i = 0; i < g.dims[0]; ++i) {
        const std::size_t l = g.linear(i, j, k);
        if (g.interior[l] || g.punctured[l]) {
          at(i + 1, j + 1, k + 1) = inf;
          any = true;
        }
      }
  if (!any) return 0.0;
  std::vector<double> line;
  for (std::int64_t k = 0; k < nz; ++k)
    for (std::int64_t j = 0; j < ny; ++j) {
      line.assign(static_cast<std::size_t>(nx), 0.0);
      for (std::int64_t i = 0; i < nx; ++i) line[i] = at(i, j, k);
      distance_transform_1d(line);
      for (std::int64_t i = 0; i < nx; ++i) at(i, j, k) = line[i];
    }
  for (std::int64_t k = 0; k < nz; ++k)
    for (std::int64_t i = 0; i < nx; ++i) {
      line.assign(static_cast<std::size_t>(ny), 0.0);
      for (std::int64_t j = 0; j < ny; ++j) line[j] = at(i, j, k);
      distance_transform_1d(line);
      for (std::int64_t j = 0; j < ny; ++j) at(i, j, k) = line[j];
    }
  double best = 0.0;
  for (std::int64_t j = 0; j < ny; ++j)
    for (std::int64_t i = 0; i < nx; ++i) {
      line.assign(static_cast<std::size_t>(nz), 0.0);
      for (std::int64_t k = 0; k < nz; ++k) line[k] = at(i, j, k);
      distance_transform_1d(line);
      for (double v : line) best = std::max(best, v);
    }
  return g.h * std::sqrt(best);
}

namespace {

struct Probe {
  bool ok = false;
  Vec3 center = Vec3::Zero();
  double cap = std::numeric_limits<double>::infinity();
};

class CenterSearch {
public:
  CenterSearch(const Scene& scene, const InradiusOptions& opt)
      : scene_(scene), opt_(opt), complement_(make_complement(scene.root)),
        box_(opt.center_box ? *opt.center_box : scene.bounding_box) {}

  double depth(const Vec3& x) const { return -scene_.signed_distance(x); }

  double capacity(const Vec3& x, double R, int budget) const {
    if (depth(x) >= R) return 0.0;
    const NodePtr region = make_intersection({make_ball(x, R), complement_});
    return region_capacity(*region, budget, scene_.dimension,
                           SampleOptions{opt_.seed, {}, {}});
  }

  // Polar test: empty, or below eps and shrinking more than 4x under refinement.
  bool polar(const Vec3& x, double R, double eps, double* cap) const {
    *cap = capacity(x, R, opt_.capacity_budget);
    if (*cap == 0.0) return true;
    if (!(*cap < eps)) return false;
    const double fine = capacity(x, R, 4 * opt_.capacity_budget);
    return fine < 0.25 * *cap;
  }

  Probe probe(double R, double eps, bool polar_mode) const {
    std::vector<Vec3> centers = lattice(R);
    std::vector<double> d(centers.size());
    for (std::size_t i = 0; i < centers.size(); ++i) d[i] = depth(centers[i]);
    std::vector<std::size_t> order(centers.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (d[a] != d[b]) return d[a] > d[b];
      return std::lexicographical_compare(centers[a].data(), centers[a].data() + 3,
                                          centers[b].data(), centers[b].data() + 3);
    });
    Probe best;
    if (order.empty()) return best;
    if (d[order[0]] >= R) return Probe{true, centers[order[0]], 0.0};

    const auto test = [&](const Vec3& x, double* cap) {
      if (polar_mode) return polar(x, R, eps, cap);
      *cap = capacity(x, R, opt_.capacity_budget);
      return *cap < eps;
    };
    const std::size_t top = std::min<std::size_t>(order.size(), opt_.top_candidates);
    for (std::size_t t = 0; t < top; ++t) {
      double cap = 0.0;
      const Vec3& x = centers[order[t]];
      const bool ok = test(x, &cap);
      if (ok) return Probe{true, x, cap};
      if (cap < best.cap) best = Probe{false, x, cap};
    }

    // Coordinate descent on the best candidate's capacity.
    double step = R / 8.0;
    int evaluations = 0;
    while (step >= 0.25 * opt_.h && evaluations < 48) {
      bool improved = false;
      for (int a = 0; a < 3 && !improved; ++a)
        for (int s : {-1, 1}) {
          Vec3 x = best.center;
          x[a] += s * step;
          if (!box_.contains(x)) continue;
          double cap = 0.0;
          const bool ok = test(x, &cap);
          ++evaluations;
          if (ok) return Probe{true, x, cap};
          if (cap < best.cap) {
            best = Probe{false, x, cap};
            improved = true;
            break;
          }
        }
      if (!improved) step *= 0.5;
    }
    return best;
  }

  bool complement_in_box() const {
    const Vec3 e = scene_.bounding_box.extent();
    const int n = 32;
    for (int k = 0; k <= n; ++k)
      for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) {
          const Vec3 x = scene_.bounding_box.lo +
                         Vec3(e.x() * i / n, e.y() * j / n, e.z() * k / n);
          if (scene_.signed_distance(x) >= 0.0) return true;
        }
    return false;
  }

  double deepest() const {
    double best = 0.0;
    for (const Vec3& x : lattice_with_spacing(opt_.h)) best = std::max(best, depth(x));
    return best;
  }

private:
  std::vector<Vec3> lattice(double R) const { return lattice_with_spacing(R / 4.0); }

  std::vector<Vec3> lattice_with_spacing(double spacing) const {
    const Vec3 e = box_.extent();
    const double cap = std::cbrt(double(opt_.max_lattice_points));
    spacing = std::max(spacing, e.maxCoeff() / cap);
    const Vec3 c = box_.center();
    std::array<std::int64_t, 3> half{};
    for (int a = 0; a < 3; ++a) half[a] = static_cast<std::int64_t>(std::floor(0.5 * e[a] / spacing));
    std::vector<Vec3> out;
    for (std::int64_t i = -half[0]; i <= half[0]; ++i)
      for (std::int64_t j = -half[1]; j <= half[1]; ++j)
        for (std::int64_t k = -half[2]; k <= half[2]; ++k)
          out.push_back(c + spacing * Vec3(double(i), double(j), double(k)));
    return out;
  }

  const Scene& scene_;
  const InradiusOptions& opt_;
  NodePtr complement_;
  AxisBox box_;
};

RadiusPoint bisect(const CenterSearch& search, double eps, double lo, double hi, double h,
                   bool polar_mode) {
  RadiusPoint out;
  out.epsilon = eps;
  Probe top = search.probe(hi, eps, polar_mode);
  if (top.ok) return RadiusPoint{eps, hi, top.center, top.cap};
  Probe at_lo = search.probe(lo, eps, polar_mode);
  while (hi - lo > h) {
    const double mid = 0.5 * (lo + hi);
    Probe p = search.probe(mid, eps, polar_mode);
    if (p.ok) {
      lo = mid;
      at_lo = p;
    } else {
      hi = mid;
    }
  }
  return RadiusPoint{eps, lo, at_lo.center, at_lo.ok ? at_lo.cap : 0.0};
}

}  // namespace

InradiusReport strict_capacity_inradius(const Scene& scene, const InradiusOptions& opt) {
  require(!opt.eps_ladder.empty(), "eps ladder must not be empty");
  for (std::size_t i = 0; i < opt.eps_ladder.size(); ++i) {
    require(opt.eps_ladder[i] > 0.0, "eps ladder must be positive");
    require(i == 0 || opt.eps_ladder[i] < opt.eps_ladder[i - 1], "eps ladder must decrease");
  }
  require(opt.h > 0.0, "h must be positive");
  InradiusReport rep;
  rep.r_max = 0.5 * scene.bounding_box.extent().norm();
  const CenterSearch search(scene, opt);
  if (!search.complement_in_box()) {
    rep.unbounded_candidate = true;
    for (double eps : opt.eps_ladder)
      rep.rho.push_back(RadiusPoint{eps, rep.r_max, scene.bounding_box.center(), 0.0});
    return rep;
  }
  const double lo = std::min(search.deepest(), rep.r_max);
  double hi = rep.r_max;
  for (double eps : opt.eps_ladder) {
    rep.rho.push_back(bisect(search, eps, std::min(lo, hi), hi, opt.h, false));
    hi = rep.rho.back().radius;
  }
  return rep;
}

RadiusPoint capacity_inradius(const Scene& scene, double eps_polar, const InradiusOptions& opt) {
  require(eps_polar > 0.0, "eps_polar must be positive");
  const CenterSearch search(scene, opt);
  const double r_max = 0.5 * scene.bounding_box.extent().norm();
  if (!search.complement_in_box()) return RadiusPoint{eps_polar, r_max, scene.bounding_box.center(), 0.0};
  const double lo = std::min(search.deepest(), r_max);
  return bisect(search, eps_polar, lo, r_max, opt.h, true);
}

InradiusReport inradius_report(const Scene& scene, double eps_polar, const InradiusOptions& opt) {
  InradiusReport rep = strict_capacity_inradius(scene, opt);
  rep.classical = classical_inradius(build_grid(scene, opt.h));
  if (rep.unbounded_candidate) {
    rep.frak_r = rep.r_max;
    rep.frak_r_eps = eps_polar;
    return rep;
  }
  const CenterSearch search(scene, opt);
  const double lo = std::min(search.deepest(), rep.rho_estimate());
  const RadiusPoint r = bisect(search, eps_polar, lo, rep.rho_estimate(), opt.h, true);
  rep.frak_r = r.radius;
  rep.frak_r_eps = eps_polar;
  rep.frak_r_center = r.center;
  return rep;
}

UpperBoundReport verify_upper_bound(const Scene& scene, double h, const InradiusOptions& opt) {
  require(scene.root->bounds().has_value(), "upper bound check needs a bounded scene");
  UpperBoundReport rep;
  rep.truncated = scene_is_truncated(scene);
  rep.lambda = dirichlet_lambda1(scene, h, 1).extrapolated;
  rep.rho = strict_capacity_inradius(scene, opt).rho_estimate();
  rep.bound = kPi * kPi / (rep.rho * rep.rho);
  rep.ratio = rep.lambda / rep.bound;
  rep.pass = rep.lambda <= 1.05 * rep.bound;
  return rep;
}

}  // namespace capr
