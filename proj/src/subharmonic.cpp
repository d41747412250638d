#include "capr/subharmonic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace capr {

double Obstacle::potential(const Vec3& x) const {
  if (analytic) return 1.0 / std::max((x - center).norm(), radius);
  return capr::potential(measure, x, 3);
}

Vec3 Obstacle::gradient(const Vec3& x) const {
  if (analytic) {
    const Vec3 d = x - center;
    const double r = d.norm();
    if (r <= radius) return Vec3::Zero();
    return -d / (r * r * r);
  }
  return potential_gradient(measure, x, 3);
}

double Obstacle::clearance(const Vec3& x) const {
  if (analytic) return (x - center).norm() - radius;
  const auto& pts = measure.support().points();
  const auto& a = measure.support().patch_radius();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i)
    best = std::min(best, (x - pts[i]).norm() - 2.0 * a[i]);
  return best;
}

namespace {

std::int64_t inf_distance(const Index3& a, const Index3& b) {
  return std::max({std::abs(a[0] - b[0]), std::abs(a[1] - b[1]), std::abs(a[2] - b[2])});
}

// Closed pieces whose union is the complement of D, restricted to those that can meet Q.
std::vector<NodePtr> complement_pieces(const Scene& scene, const AxisBox& Q) {
  const auto* comp = std::get_if<ComplementNode>(&scene.root->data());
  if (!comp) return {make_complement(scene.root)};
  std::vector<NodePtr> stack{comp->child}, out;
  while (!stack.empty()) {
    NodePtr n = stack.back();
    stack.pop_back();
    if (const auto* u = std::get_if<UnionNode>(&n->data())) {
      for (auto it = u->children.rbegin(); it != u->children.rend(); ++it) stack.push_back(*it);
    } else if (const auto* l = std::get_if<LatticeBallsNode>(&n->data())) {
      std::array<std::int64_t, 3> lo{}, hi{};
      for (int a = 0; a < 3; ++a) {
        lo[a] = static_cast<std::int64_t>(std::floor((Q.lo[a] - l->offset[a] - l->radius) / l->spacing));
        hi[a] = static_cast<std::int64_t>(std::ceil((Q.hi[a] - l->offset[a] + l->radius) / l->spacing));
      }
      for (std::int64_t i = lo[0]; i <= hi[0]; ++i)
        for (std::int64_t j = lo[1]; j <= hi[1]; ++j)
          for (std::int64_t k = lo[2]; k <= hi[2]; ++k) {
            const Index3 idx{i, j, k};
            if (!l->has_site(idx)) continue;
            const Vec3 c = l->site(idx);
            const double r = l->radius_at(idx);
            const Vec3 nearest = c.cwiseMax(Q.lo).cwiseMin(Q.hi);
            if ((nearest - c).norm() < r) out.push_back(make_ball(c, r));
          }
    } else {
      const auto b = n->bounds();
      if (!b || !b->intersect(Q).degenerate()) out.push_back(n);
    }
  }
  return out;
}

bool ball_inside(const BallNode& b, const AxisBox& Q) {
  return ((b.center.array() - b.radius) >= Q.lo.array()).all() &&
         ((b.center.array() + b.radius) <= Q.hi.array()).all();
}

class ObstacleBuilder {
public:
  ObstacleBuilder(const Scene& scene, const CertificateConfig& cfg) : scene_(scene), cfg_(cfg) {}

  // Largest-capacity piece inside cube m; nullopt when nothing nonpolar is there.
  std::optional<Obstacle> build(const Index3& m) {
    const AxisBox Q = lattice_cube(cfg_.M, m);
    const Vec3 c = Q.center();
    // Whole cube in the complement: translate one shared solve.
    if (scene_.signed_distance(c) >= std::sqrt(3.0) * cfg_.M) return full_cube(m);

    std::optional<Obstacle> best;
    for (const NodePtr& piece : complement_pieces(scene_, Q)) {
      Obstacle o;
      o.cube = m;
      const auto* ball = std::get_if<BallNode>(&piece->data());
      if (ball && ball_inside(*ball, Q) && cfg_.rule == ObstacleRule::analytic_balls) {
        o.analytic = true;
        o.center = ball->center;
        o.radius = ball->radius;
        o.capacity = ball->radius;
      } else {
        CompactSample K;
        try {
          if (ball && ball_inside(*ball, Q))
            K = sample_compact(*piece, cfg_.obstacle_budget, SampleOptions{cfg_.seed, {}, {}});
          else
            K = sample_compact(*make_intersection({piece, make_box(Q.lo, Q.hi)}),
                               cfg_.obstacle_budget, SampleOptions{cfg_.seed, Q, {}});
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::empty_compact_set) throw;
          continue;
        }
        const EquilibriumResult r = equilibrium(K, 3);
        if (!r.converged) throw Error(ErrorKind::not_converged, "obstacle solve did not converge");
        o.measure = r.measure;
        o.capacity = r.capacity;
      }
      if (!best || o.capacity > best->capacity) best = std::move(o);
    }
    return best;
  }

private:
  std::optional<Obstacle> full_cube(const Index3& m) {
    if (!cube_template_) {
      const AxisBox Q0 = lattice_cube(cfg_.M, {0, 0, 0});
      const CompactSample K =
          sample_compact(*make_box(Q0.lo, Q0.hi), cfg_.obstacle_budget, SampleOptions{cfg_.seed, {}, {}});
      const EquilibriumResult r = equilibrium(K, 3);
      Obstacle o;
      o.measure = r.measure;
      o.capacity = r.capacity;
      cube_template_ = std::move(o);
    }
    Obstacle o = *cube_template_;
    o.cube = m;
    const Vec3 shift = lattice_cube(cfg_.M, m).center();
    o.measure = DiscreteMeasure(cube_template_->measure.support().transformed(1.0, shift),
                                cube_template_->measure.weights());
    return o;
  }

  const Scene& scene_;
  const CertificateConfig& cfg_;
  std::optional<Obstacle> cube_template_;
};

}  // namespace

ObstacleSet select_obstacles(const Scene& scene, const CertificateConfig& cfg) {
  require(cfg.M > 0.0, "M must be positive");
  require(cfg.shells >= 2, "shell cutoff must be at least 2");
  require(cfg.obstacle_budget >= 2, "obstacle budget must be at least 2");
  require(scene.dimension == 3, "certificates are built for n = 3");
  ObstacleSet set;
  set.M = cfg.M;
  const AxisBox& bb = scene.bounding_box;
  Index3 lo{}, hi{};
  for (int a = 0; a < 3; ++a) {
    // Cubes [2Mm - M, 2Mm + M] that overlap the box with positive volume.
    lo[a] = static_cast<std::int64_t>(std::floor((bb.lo[a] - cfg.M) / (2.0 * cfg.M))) + 1;
    hi[a] = static_cast<std::int64_t>(std::ceil((bb.hi[a] + cfg.M) / (2.0 * cfg.M))) - 1;
  }
  const std::int64_t margin = cfg.margin_cubes ? cfg.shells : 0;
  ObstacleBuilder builder(scene, cfg);
  set.min_capacity = std::numeric_limits<double>::infinity();
  for (std::int64_t i = lo[0] - margin; i <= hi[0] + margin; ++i)
    for (std::int64_t j = lo[1] - margin; j <= hi[1] + margin; ++j)
      for (std::int64_t k = lo[2] - margin; k <= hi[2] + margin; ++k) {
        const Index3 m{i, j, k};
        const bool required = i >= lo[0] && i <= hi[0] && j >= lo[1] && j <= hi[1] &&
                              k >= lo[2] && k <= hi[2];
        std::optional<Obstacle> o = builder.build(m);
        const double cap = o ? o->capacity : 0.0;
        if (cap < 1e-6) {
          if (required)
            throw Error(ErrorKind::m_too_small,
                        "M too small: cube (" + std::to_string(i) + "," + std::to_string(j) +
                            "," + std::to_string(k) + ") has a polar complement");
          continue;
        }
        if (required)
          ++set.required_cubes;
        else
          ++set.margin_cubes;
        set.min_capacity = std::min(set.min_capacity, cap);
        set.obstacles.push_back(std::move(*o));
      }
  set.delta = 0.5 * set.min_capacity;
  return set;
}

double shell_tail_bound(int shells, double M, double delta, double s, int n) {
  require(shells >= 1 && M > 0.0 && delta > 0.0 && s > 0.0, "invalid tail parameters");
  double sum = 0.0;
  for (int lam = shells + 1; lam < shells + 10000; ++lam) {
    const double count = std::pow(2.0 * lam + 1.0, n) - std::pow(2.0 * lam - 1.0, n);
    const double exponent = -(s / delta) * std::pow(2.0 * (lam - 1) * M, n - 2);
    const double term = count * std::exp(exponent);
    sum += term;
    if (term < 1e-300 || (exponent < -50.0 && term < 1e-30 * sum)) break;
  }
  return sum;
}

SubharmonicCertificate::SubharmonicCertificate(CertificateConfig config, ObstacleSet obstacles)
    : config_(std::move(config)), set_(std::move(obstacles)) {
  require(!set_.obstacles.empty(), "certificate needs obstacles");
  require(set_.delta > 0.0, "delta must be positive");
  for (std::size_t i = 0; i < set_.obstacles.size(); ++i) by_cube_[set_.obstacles[i].cube] = i;
}

template <class F>
void SubharmonicCertificate::for_each_term(const Vec3& x, F&& f) const {
  const Index3 mx = cube_index(config_.M, x);
  const double a = config_.exponent_scale / set_.delta;
  for (const Obstacle& o : set_.obstacles) {
    if (inf_distance(o.cube, mx) > config_.shells) continue;
    const double p = o.potential(x);
    if (!(p > 0.0)) continue;
    const double e = a / p;
    if (e > 745.0) continue;  // below the smallest double
    f(o, p, a, std::exp(-e));
  }
}

double SubharmonicCertificate::phi(const Vec3& x) const {
  double sum = 0.0;
  for_each_term(x, [&](const Obstacle&, double, double, double T) { sum += T; });
  return sum;
}

Vec3 SubharmonicCertificate::gradient(const Vec3& x) const {
  Vec3 g = Vec3::Zero();
  for_each_term(x, [&](const Obstacle& o, double p, double a, double T) {
    g += T * (a / (p * p)) * o.gradient(x);
  });
  return g;
}

double SubharmonicCertificate::laplacian(const Vec3& x) const {
  double sum = 0.0;
  for_each_term(x, [&](const Obstacle& o, double p, double a, double T) {
    sum += T * (a / (p * p * p)) * (a / p - 2.0) * o.gradient(x).squaredNorm();
  });
  return sum;
}

double SubharmonicCertificate::min_term_laplacian(const Vec3& x) const {
  double best = std::numeric_limits<double>::infinity();
  for_each_term(x, [&](const Obstacle& o, double p, double a, double T) {
    best = std::min(best, T * (a / (p * p * p)) * (a / p - 2.0) * o.gradient(x).squaredNorm());
  });
  return best;
}

bool SubharmonicCertificate::probe_valid(const Vec3& x, double margin) const {
  const Index3 mx = cube_index(config_.M, x);
  for (const Obstacle& o : set_.obstacles) {
    if (inf_distance(o.cube, mx) > config_.shells + 1) continue;
    if (o.clearance(x) < margin) return false;
  }
  return true;
}

SubharmonicCertificate build_phi(const Scene& scene, ObstacleSet obstacles,
                                 const CertificateConfig& config) {
  require(config.shells >= 2, "shell cutoff must be at least 2");
  SubharmonicCertificate cert(config, std::move(obstacles));
  cert.truncation_tail =
      shell_tail_bound(config.shells, config.M, cert.delta(), config.exponent_scale, 3);
  const double spacing = config.probe_spacing > 0.0 ? config.probe_spacing : 0.25 * config.M;
  const Grid g = build_grid(scene, spacing);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (!g.interior[i]) continue;
    const double v = cert.phi(g.point(i));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    ++count;
  }
  cert.lower_bound_m = lo;
  cert.upper_bound_M_phi = hi + cert.truncation_tail;
  cert.probe_count = count;
  return cert;
}

std::vector<Vec3> certificate_probes(const Scene& scene, const SubharmonicCertificate& cert,
                                     double spacing) {
  const Grid g = build_grid(scene, spacing);
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < g.node_count(); ++i)
    if (g.interior[i] && cert.probe_valid(g.point(i), 0.0)) out.push_back(g.point(i));
  return out;
}

FloorReport laplacian_floor(const SubharmonicCertificate& cert, const std::vector<Vec3>& probes,
                            double fd_step) {
  const double h = fd_step > 0.0 ? fd_step : 1e-3 * cert.config().M;
  FloorReport rep;
  rep.c = std::numeric_limits<double>::infinity();
  rep.c_fd = std::numeric_limits<double>::infinity();
  for (const Vec3& x : probes) {
    if (!cert.probe_valid(x, 2.0 * h)) continue;
    ++rep.valid_probes;
    const double L = cert.laplacian(x);
    double fd = -6.0 * cert.phi(x);
    for (int a = 0; a < 3; ++a) {
      Vec3 e = Vec3::Zero();
      e[a] = h;
      fd += cert.phi(x + e) + cert.phi(x - e);
    }
    fd /= h * h;
    rep.c = std::min(rep.c, L);
    rep.c_fd = std::min(rep.c_fd, fd);
    if (L != 0.0) rep.max_relative_gap = std::max(rep.max_relative_gap, std::abs(fd - L) / std::abs(L));
    if (cert.min_term_laplacian(x) < 0.0) rep.terms_nonnegative = false;
  }
  if (rep.valid_probes == 0) throw Error(ErrorKind::precondition, "no valid probes");
  rep.agree = rep.max_relative_gap <= 0.05;
  if (!(rep.c > 0.0))
    throw Error(ErrorKind::certificate_failed, "certificate failed: Laplacian floor is not positive");
  return rep;
}

LowerBounds lambda1_lower_bounds(double c, double m, double M_phi) {
  require(c > 0.0, "Laplacian floor must be positive");
  if (!(M_phi > m)) throw Error(ErrorKind::zero_oscillation, "invalid: zero oscillation");
  LowerBounds b;
  b.hormander = c * std::exp(m - M_phi);
  const double M_tilde = M_phi * (1.0 + 1e-6);
  b.lee = c / (M_tilde - m);
  b.lee_dominates = b.lee >= b.hormander;
  return b;
}

double QuadraticField::value(const Vec3& x) const {
  return offset_ + (k_.array() * (x - c_).array().square()).sum();
}

Vec3 QuadraticField::gradient(const Vec3& x) const {
  return 2.0 * (k_.array() * (x - c_).array()).matrix();
}

double SlabCosineField::value(const Vec3& x) const { return std::cos(kPi * x.x() / (2.0 * L_)); }

Vec3 SlabCosineField::gradient(const Vec3& x) const {
  const double k = kPi / (2.0 * L_);
  return Vec3(-k * std::sin(k * x.x()), 0.0, 0.0);
}

double SlabCosineField::laplacian(const Vec3& x) const {
  const double k = kPi / (2.0 * L_);
  return -k * k * std::cos(k * x.x());
}

namespace {

double bump1(double t) { return std::abs(t) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - t * t)) : 0.0; }

double bump1_derivative(double t) {
  if (std::abs(t) >= 1.0) return 0.0;
  const double q = 1.0 - t * t;
  return bump1(t) * (-2.0 * t / (q * q));
}

}  // namespace

double Bump::value(const Vec3& x) const {
  double v = amplitude;
  for (int a = 0; a < 3; ++a) v *= bump1((x[a] - center[a]) / half_width[a]);
  return v;
}

Vec3 Bump::gradient(const Vec3& x) const {
  std::array<double, 3> b{}, d{};
  for (int a = 0; a < 3; ++a) {
    const double t = (x[a] - center[a]) / half_width[a];
    b[a] = bump1(t);
    d[a] = bump1_derivative(t) / half_width[a];
  }
  return amplitude * Vec3(d[0] * b[1] * b[2], b[0] * d[1] * b[2], b[0] * b[1] * d[2]);
}

std::vector<Bump> random_bumps(int count, const AxisBox& region, double min_width,
                               double max_width, std::uint64_t seed) {
  require(count >= 0, "bump count must be nonnegative");
  require(min_width > 0.0 && max_width >= min_width, "invalid bump widths");
  require((region.extent().array() > 2.0 * min_width).all(), "region too small for the bumps");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Bump> out;
  for (int i = 0; i < count; ++i) {
    Bump b;
    for (int a = 0; a < 3; ++a) {
      const double wmax = std::min(max_width, 0.5 * region.extent()[a]);
      b.half_width[a] = min_width + (wmax - min_width) * unit(rng);
      const double lo = region.lo[a] + b.half_width[a], hi = region.hi[a] - b.half_width[a];
      b.center[a] = lo + (hi - lo) * unit(rng);
    }
    out.push_back(b);
  }
  return out;
}

int IntegralReport::passed() const {
  return static_cast<int>(std::count_if(records.begin(), records.end(),
                                        [](const IntegralRecord& r) { return r.pass; }));
}

namespace {

template <class F>
void quadrature(const Bump& b, int n, F&& f) {
  const Vec3 lo = b.center - b.half_width;
  const Vec3 step = 2.0 * b.half_width / double(n);
  const double dV = step.prod();
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        f(lo + Vec3((i + 0.5) * step.x(), (j + 0.5) * step.y(), (k + 0.5) * step.z()), dV);
}

}  // namespace

IntegralReport verify_twisted_inequality(const ScalarField& phi, const std::vector<Bump>& bumps,
                                         int nodes, double slack) {
  require(nodes >= 4, "need at least 4 quadrature nodes per axis");
  IntegralReport rep;
  for (const Bump& b : bumps) {
    double M = -std::numeric_limits<double>::infinity();
    quadrature(b, nodes, [&](const Vec3& x, double) { M = std::max(M, phi.value(x)); });
    IntegralRecord r;
    r.bump = b;
    quadrature(b, nodes, [&](const Vec3& x, double dV) {
      const double w = b.value(x);
      r.lhs += phi.laplacian(x) * w * w * std::exp(phi.value(x) - M) * dV;
      r.rhs += b.gradient(x).squaredNorm() * dV;
    });
    r.pass = r.lhs <= (1.0 + slack) * r.rhs;
    rep.records.push_back(r);
  }
  return rep;
}

IntegralReport verify_lee_identity(const ScalarField& phi, const std::vector<Bump>& bumps,
                                   int nodes, double tolerance) {
  require(nodes >= 4, "need at least 4 quadrature nodes per axis");
  IntegralReport rep;
  for (const Bump& b : bumps) {
    IntegralRecord r;
    r.bump = b;
    quadrature(b, nodes, [&](const Vec3& x, double dV) {
      const double v = phi.value(x);
      require(v > 0.0, "phi must be positive on the bump support");
      const double w = b.value(x);
      const Vec3 gw = b.gradient(x);
      r.lhs += (w * w * phi.laplacian(x) / v + gw.squaredNorm()) * dV;
      r.rhs += (gw - w * phi.gradient(x) / v).squaredNorm() * dV;
    });
    const double scale = std::max(std::abs(r.rhs), 1e-300);
    r.pass = std::abs(r.lhs - r.rhs) / scale < tolerance;
    rep.records.push_back(r);
  }
  return rep;
}

}  // namespace capr
