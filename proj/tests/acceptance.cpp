#include "capr/capacity.hpp"
#include "capr/inradius.hpp"
#include "capr/scene_io.hpp"
#include "capr/spectral.hpp"
#include "capr/subharmonic.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace capr;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Scene load(const char* name) {
  return load_scene(std::string(CAPR_SOURCE_DIR "/scenes/") + name + ".json");
}

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void run(int id, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, false, std::string("error: ") + e.what());
  }
}

Scene box_scene(NodePtr root, const AxisBox& box) { return Scene{3, box, std::move(root)}; }

void criterion1() {
#ifdef _OPENMP
  const int threads = omp_get_max_threads();
  omp_set_num_threads(1);
#endif
  const auto t0 = Clock::now();
  const CompactSample K = sample_compact(*make_ball(Vec3::Zero(), 1.0), 2000);
  const double cap = equilibrium(K, 3).capacity;
  const double t = seconds_since(t0);
#ifdef _OPENMP
  omp_set_num_threads(threads);
#endif
  report(1, std::abs(cap - 1.0) <= 0.02 && t < 30.0,
         fmt("cap(unit sphere, N=2000) = %.5f, single thread %.2f s", cap, t));
}

void criterion2() {
  const CompactSample K = sample_compact(*make_ball(Vec3::Zero(), 1.0), 2000);
  const double base = equilibrium(K, 3).capacity;
  bool pass = true;
  std::string detail;
  for (double r : {0.5, 2.0}) {
    const double c = equilibrium(K.transformed(r, Vec3::Zero()), 3).capacity;
    const double rel = std::abs(c - r * base) / (r * base);
    pass = pass && rel <= 0.01;
    detail += fmt("r=%.1f rel.err %.2e; ", r, rel);
  }
  const double moved = equilibrium(K.transformed(1.0, Vec3(3.7, -2.1, 1.1)), 3).capacity;
  const double drift = std::abs(moved - base) / base;
  pass = pass && drift <= 1e-12;
  report(2, pass, detail + fmt("translation drift %.1e", drift));
}

NodePtr random_compact(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), s(0.2, 0.8);
  const auto ball = [&] { return make_ball(Vec3(u(rng), u(rng), u(rng)) * 0.5, s(rng)); };
  const auto box = [&] {
    const Vec3 lo(u(rng), u(rng), u(rng));
    return make_box(lo, lo + Vec3(s(rng), s(rng), s(rng)));
  };
  switch (rng() % 4) {
    case 0: return ball();
    case 1: return box();
    case 2: return make_union({ball(), ball()});
    default: return make_union({box(), ball()});
  }
}

void criterion3() {
  std::mt19937_64 rng(kDefaultSeed);
  double worst = 0.0;
  std::string worst_shape;
  int over = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const NodePtr node = random_compact(rng);
    const CompactSample K = sample_compact(*node, 4000, SampleOptions{rng(), {}, {}});
    const EquilibriumResult r = equilibrium(K, 3);
    const AxisBox box = node->bounds()->inflated(0.5);
    const int n = 24;
    double pmax = 0.0;
#pragma omp parallel for reduction(max : pmax) collapse(2)
    for (int k = 0; k <= n; ++k)
      for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) {
          const Vec3 x = box.lo + box.extent().cwiseProduct(Vec3(i, j, k) / double(n));
          pmax = std::max(pmax, potential(r.measure, x, 3));
        }
    over += pmax > 1.02 * r.energy;
    if (pmax / r.energy > worst) {
      worst = pmax / r.energy;
      worst_shape = node->type_name();
    }
  }
  report(3, over == 0,
         fmt("10 random compacta (budget 4000): %d over 1.02; worst p / I = %.4f (%s)", over, worst,
             worst_shape.c_str()));
}

void criterion4() {
  const double pi2 = kPi * kPi;
  auto t0 = Clock::now();
  const double ball = dirichlet_lambda1(load("unit_ball"), 1.0 / 24.0).extrapolated;
  const double tb = seconds_since(t0);
  t0 = Clock::now();
  const double cube = dirichlet_lambda1(load("unit_cube"), 1.0 / 24.0).extrapolated;
  const double tc = seconds_since(t0);
  const double eb = (ball - pi2) / pi2, ec = (cube - 3 * pi2) / (3 * pi2);
  report(4, std::abs(eb) <= 0.02 && std::abs(ec) <= 0.02 && tb < 120 && tc < 120,
         fmt("ball %.4f (%+.2f%%, %.1f s), cube %.4f (%+.3f%%, %.2f s)", ball, 100 * eb, tb, cube,
             100 * ec, tc));
}

void criterion5() {
  const LawReport rep = law_checks(load("unit_ball"), 2.0, Vec3(0.3, -0.2, 0.1), 1.0 / 12.0);
  std::string detail;
  for (const LawCheck& c : rep.checks)
    detail += fmt("%s %s (%.4g vs %.4g); ", c.name.c_str(), c.pass ? "ok" : "off", c.lhs, c.rhs);
  report(5, rep.pass(), detail);
}

void criterion6() {
  bool pass = true;
  std::string detail;
  InradiusOptions io;
  io.h = 1.0 / 24.0;
  for (const char* name : {"unit_ball", "box", "ball_minus_ball", "l_shape"}) {
    const UpperBoundReport u = verify_upper_bound(load(name), 1.0 / 24.0, io);
    pass = pass && u.pass;
    if (std::string(name) == "unit_ball") pass = pass && std::abs(u.ratio - 1.0) <= 0.05;
    detail += fmt("%s %.3f/%.3f R*=%.3f; ", name, u.lambda, u.bound, u.rho);
  }
  report(6, pass, detail);
}

void criterion7() {
  ContinuityOptions o;
  const ContinuityReport c = eigenvalue_continuity_experiment({0.2, 0.1, 0.05}, o);
  bool caps = true;
  std::string detail = fmt("lambda(B)=%.4f; ", c.lambda_ball);
  for (const ContinuityRow& r : c.rows) {
    caps = caps && std::abs(r.capacity - r.radius) <= 0.05 * r.radius;
    detail += fmt("r=%.2f cap %.4f gap %.2f%%; ", r.radius, r.capacity,
                  100 * r.gap / c.lambda_ball);
  }
  report(7, caps && c.gap_decreasing && c.final_relative_gap < 0.05, detail);

  // Off-centre obstacles sit where the eigenfunction is smaller.
  o.center = Vec3(0.5, 0.0, 0.0);
  const ContinuityReport off = eigenvalue_continuity_experiment({0.2, 0.1, 0.05}, o);
  std::printf("  note: obstacles centred at (0.5,0,0): final gap %.2f%%, trends %s\n",
              100 * off.final_relative_gap, off.pass ? "hold" : "fail");
}

void criterion8() {
  const CompactSample K = sample_compact(*make_ball(Vec3::Zero(), 0.1), 1000);
  const EquilibriumResult r = equilibrium(K, 3);
  const PotentialField g(r.measure, 1.0 / r.energy, 3);
  const int samples = 1000000;
  std::vector<Vec3> pts;
  pts.reserve(samples);
  std::mt19937_64 rng(kDefaultSeed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  while (int(pts.size()) < samples) {
    const Vec3 x(u(rng), u(rng), u(rng));
    if (x.squaredNorm() < 1.0) pts.push_back(x);
  }
  double sum = 0.0;
#pragma omp parallel for reduction(+ : sum)
  for (int i = 0; i < samples; ++i) sum += g(pts[std::size_t(i)]);
  const double integral = sum / samples * (4.0 / 3.0) * kPi;
  const double bound = 8.0 * kPi / r.energy;
  report(8, integral <= 1.05 * bound,
         fmt("int_B g = %.4f, 8 pi / I = %.4f (1e6 samples)", integral, bound));
}

// phi from closed-form sphere potentials 1/max(|x - c|, a) of the lattice balls.
double lattice_phi(const Vec3& x, double a, double delta, double s, int shells) {
  const Index3 mx = cube_index(1.0, x);
  double sum = 0.0;
  for (std::int64_t i = -shells; i <= shells; ++i)
    for (std::int64_t j = -shells; j <= shells; ++j)
      for (std::int64_t k = -shells; k <= shells; ++k) {
        const Vec3 c = 2.0 * Vec3(double(mx[0] + i), double(mx[1] + j), double(mx[2] + k));
        if (c.norm() > 5.0 + 1e-9) continue;
        sum += std::exp(-s / (delta * (1.0 / std::max((x - c).norm(), a))));
      }
  return sum;
}

void criterion9() {
  const auto t0 = Clock::now();
  const Scene scene = load("lattice_of_balls");

  CertificateConfig sampled;
  sampled.obstacle_budget = 2000;
  const double delta_sampled = select_obstacles(scene, sampled).delta;
  const bool delta_ok = std::abs(delta_sampled - 0.125) <= 0.02 * 0.125;

  CertificateConfig cfg;
  cfg.rule = ObstacleRule::analytic_balls;
  const ObstacleSet set = select_obstacles(scene, cfg);
  const SubharmonicCertificate cert = build_phi(scene, set, cfg);
  std::mt19937_64 rng(kDefaultSeed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  double phi_err = 0.0;
  int probes = 0;
  while (probes < 100) {
    const Vec3 x(u(rng), u(rng), u(rng));
    if (!cert.probe_valid(x, 0.01)) continue;
    ++probes;
    const double ref = lattice_phi(x, 0.25, 0.125, cfg.exponent_scale, cfg.shells);
    phi_err = std::max(phi_err, std::abs(cert.phi(x) - ref) / ref);
  }
  const FloorReport floor = laplacian_floor(cert, certificate_probes(scene, cert, 0.25));
  const LowerBounds lb = lambda1_lower_bounds(floor.c, cert.lower_bound_m, cert.upper_bound_M_phi);

  Scene trunc{3, AxisBox{Vec3::Constant(-5), Vec3::Constant(5)},
              make_intersection({make_box(Vec3::Constant(-5), Vec3::Constant(5)), scene.root})};
  const double lam_trunc = dirichlet_lambda1(trunc, 0.25).extrapolated;
  const double t = seconds_since(t0);

  const bool pass = delta_ok && phi_err <= 1e-6 && floor.c > 0.0 && floor.agree &&
                    lb.hormander <= lam_trunc && lb.lee <= lam_trunc && lb.lee_dominates &&
                    t < 300.0;
  report(9, pass,
         fmt("delta(sampled, N=2000) = %.5f; phi rel.err %.1e at 100 probes; c = %.3e, "
             "FD gap %.1e; hormander %.3e <= lee %.3e <= lambda(trunc) %.4f; %.1f s",
             delta_sampled, phi_err, floor.c, floor.max_relative_gap, lb.hormander, lb.lee,
             lam_trunc, t));
}

void criterion10() {
  const AxisBox region{Vec3::Constant(-1.0), Vec3::Constant(1.0)};
  const auto bumps = random_bumps(20, region, 0.2, 0.8, kDefaultSeed);
  const QuadraticField quad(Vec3(0.1, -0.2, 0.3), Vec3(3.0, 1.0, 2.0), 0.5);
  const SlabCosineField slab(1.5);

  const Scene scene = load("lattice_of_balls");
  CertificateConfig cfg;
  cfg.rule = ObstacleRule::analytic_balls;
  const SubharmonicCertificate cert = build_phi(scene, select_obstacles(scene, cfg), cfg);
  const CertificateField phi(cert);
  // Bumps between the lattice balls, away from their supports.
  const AxisBox gap{Vec3::Constant(0.4), Vec3::Constant(1.6)};
  const auto gap_bumps = random_bumps(20, gap, 0.1, 0.3, kDefaultSeed);

  const IntegralReport tw_quad = verify_twisted_inequality(quad, bumps, 32);
  const IntegralReport tw_cert = verify_twisted_inequality(phi, gap_bumps, 32);
  const IntegralReport lee_quad = verify_lee_identity(quad, bumps, 32);
  const IntegralReport lee_slab = verify_lee_identity(slab, bumps, 32);
  const IntegralReport lee_cert = verify_lee_identity(phi, gap_bumps, 32);
  report(10,
         tw_quad.pass() && tw_cert.pass() && lee_quad.pass() && lee_slab.pass() && lee_cert.pass(),
         fmt("twisted: quadratic %d/20, certificate %d/20; Lee: quadratic %d/20, slab %d/20, "
             "certificate %d/20",
             tw_quad.passed(), tw_cert.passed(), lee_quad.passed(), lee_slab.passed(),
             lee_cert.passed()));
}

double active_set_energy(const Eigen::MatrixXd& A) {
  const int N = static_cast<int>(A.rows());
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << N); ++mask) {
    std::vector<int> S;
    for (int i = 0; i < N; ++i)
      if (mask & (1u << i)) S.push_back(i);
    const int k = static_cast<int>(S.size());
    Eigen::MatrixXd B(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) B(i, j) = A(S[i], S[j]);
    const Eigen::VectorXd y = B.fullPivLu().solve(Eigen::VectorXd::Ones(k));
    if (!(y.sum() > 0.0) || y.minCoeff() < -1e-14) continue;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(N);
    for (int i = 0; i < k; ++i) w[S[i]] = y[i] / y.sum();
    const Eigen::VectorXd Aw = A * w;
    const double E = w.dot(Aw);
    bool kkt = true;
    for (int i = 0; i < N; ++i)
      if (!(mask & (1u << i)) && Aw[i] < E - 1e-12) kkt = false;
    if (kkt) best = std::min(best, E);
  }
  return best;
}

void criterion11() {
  std::mt19937_64 rng(kDefaultSeed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double energy_err = 0.0;
  for (int N = 3; N <= 12; ++N) {
    std::vector<Vec3> pts;
    while (int(pts.size()) < N) {
      const Vec3 p(u(rng), u(rng), u(rng));
      bool apart = true;
      for (const auto& q : pts) apart = apart && (p - q).norm() > 0.15;
      if (apart) pts.push_back(p);
    }
    const CompactSample K = CompactSample::with_default_radii(pts, 0.5, "random");
    EquilibriumOptions o;
    o.tol = 1e-13;
    const double oracle = active_set_energy(kernel_matrix(K, 3));
    energy_err = std::max(energy_err, std::abs(equilibrium(K, 3, o).energy - oracle) / oracle);
  }

  double eig_err = 0.0;
  const std::vector<std::pair<Scene, double>> grids{
      {box_scene(make_box(Vec3::Zero(), Vec3::Ones()), AxisBox{Vec3::Zero(), Vec3::Ones()}),
       1.0 / 6.0},
      {load("unit_ball"), 0.3},
      {load("l_shape"), 0.3},
      {load("punctured_ball"), 0.3}};
  for (const auto& [scene, h0] : grids) {
    double h = h0;
    Grid g = build_grid(scene, h);
    while (g.interior_count() > 200) g = build_grid(scene, h *= 1.1);
    const LaplacianSystem sys = assemble_laplacian(g);
    const double oracle =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Eigen::MatrixXd(sys.matrix))
            .eigenvalues()[0];
    eig_err = std::max(eig_err, std::abs(smallest_eigenpair(sys.matrix).value - oracle) / oracle);
  }
  report(11, energy_err <= 1e-6 && eig_err <= 1e-9,
         fmt("active-set energy rel.err %.1e (N=3..12); dense eigenvalue rel.err %.1e", energy_err,
             eig_err));
}

}  // namespace

int main() {
  run(1, criterion1);
  run(2, criterion2);
  run(3, criterion3);
  run(4, criterion4);
  run(5, criterion5);
  run(6, criterion6);
  run(7, criterion7);
  run(8, criterion8);
  run(9, criterion9);
  run(10, criterion10);
  run(11, criterion11);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
