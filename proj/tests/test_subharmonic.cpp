#include "capr/subharmonic.hpp"
#include "capr/scene_io.hpp"

#include <doctest.h>

#include <cmath>

using namespace capr;

namespace {

Scene lattice_scene() { return load_scene(CAPR_SOURCE_DIR "/scenes/lattice_of_balls.json"); }

// exp(-s/(delta p)) summed over balls of radius a at the points 2m, with p the
// potential 1/max(|x - 2m|, a) of the normalized surface measure.
double lattice_phi(const Vec3& x, double a, double delta, double s, int shells) {
  const Index3 mx = cube_index(1.0, x);
  double sum = 0.0;
  for (std::int64_t i = -shells; i <= shells; ++i)
    for (std::int64_t j = -shells; j <= shells; ++j)
      for (std::int64_t k = -shells; k <= shells; ++k) {
        const Vec3 c = 2.0 * Vec3(double(mx[0] + i), double(mx[1] + j), double(mx[2] + k));
        if (c.cwiseAbs().maxCoeff() > 5.0 + 1e-9 || c.norm() > 5.0 + 1e-9) continue;
        const double p = 1.0 / std::max((x - c).norm(), a);
        sum += std::exp(-s / (delta * p));
      }
  return sum;
}

}  // namespace

TEST_CASE("lower bound formulas") {
  const LowerBounds b = lambda1_lower_bounds(1.0, 0.0, 1.0);
  CHECK(b.hormander == doctest::Approx(std::exp(-1.0)));
  CHECK(b.lee == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(b.lee_dominates);
  try {
    lambda1_lower_bounds(2.0, 0.5, 0.5);
    FAIL("expected zero_oscillation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::zero_oscillation);
  }
}

TEST_CASE("analytic lattice obstacles") {
  CertificateConfig cfg;
  cfg.rule = ObstacleRule::analytic_balls;
  const Scene s = lattice_scene();
  const ObstacleSet set = select_obstacles(s, cfg);
  CHECK(set.delta == doctest::Approx(0.125));
  CHECK(set.required_cubes == 27);
  for (const Obstacle& o : set.obstacles) CHECK(o.radius == doctest::Approx(0.25));

  const SubharmonicCertificate cert = build_phi(s, set, cfg);
  int probes = 0;
  for (int i = 0; i < 100; ++i) {
    const Vec3 x(-2.9 + 0.058 * i, std::sin(1.3 * i) * 2.5, std::cos(0.7 * i) * 2.5);
    if (!cert.probe_valid(x, 0.01)) continue;
    ++probes;
    const double ref = lattice_phi(x, 0.25, 0.125, cfg.exponent_scale, cfg.shells);
    CHECK(std::abs(cert.phi(x) - ref) <= 1e-6 * std::max(ref, 1e-300));
  }
  CHECK(probes > 80);
  CHECK(cert.upper_bound_M_phi > cert.lower_bound_m);
  CHECK(cert.lower_bound_m > 0.0);
}

TEST_CASE("omitted shells stay under the tail bound") {
  CertificateConfig wide;
  wide.rule = ObstacleRule::analytic_balls;
  wide.shells = 4;
  const Scene s = lattice_scene();
  const ObstacleSet set = select_obstacles(s, wide);
  CertificateConfig narrow = wide;
  narrow.shells = 2;
  const SubharmonicCertificate c4(wide, set);
  const SubharmonicCertificate c2(narrow, set);
  const double tail = shell_tail_bound(2, 1.0, set.delta, wide.exponent_scale);
  for (int i = 0; i < 50; ++i) {
    const Vec3 x(0.11 * i - 2.7, 0.5, -0.9);
    CHECK(std::abs(c4.phi(x) - c2.phi(x)) <= tail);
  }
}

TEST_CASE("single term Laplacian matches the radial closed form") {
  const double a = 0.25, delta = 0.125, s = 4.0;
  Obstacle o;
  o.analytic = true;
  o.radius = a;
  o.capacity = a;
  ObstacleSet set;
  set.obstacles.push_back(o);
  set.delta = delta;
  set.min_capacity = a;
  CertificateConfig cfg;
  const SubharmonicCertificate cert(cfg, set);
  const Vec3 x(2.0, 0.0, 0.0);
  // phi = exp(-k r) with k = s / delta, so Lap phi = exp(-k r) (k^2 - 2 k / r).
  const double k = s / delta, r = 2.0;
  const double oracle = std::exp(-k * r) * (k * k - 2.0 * k / r);
  CHECK(std::abs(cert.laplacian(x) - oracle) <= 1e-8 * oracle);
  CHECK(cert.phi(x) == doctest::Approx(std::exp(-k * r)).epsilon(1e-12));
}

TEST_CASE("all of space minus a point is rejected") {
  const Scene s{3, AxisBox{Vec3::Constant(-1), Vec3::Constant(1)},
                make_complement(make_punctures(nullptr, {Vec3::Zero()}))};
  try {
    select_obstacles(s, CertificateConfig{});
    FAIL("expected m_too_small");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::m_too_small);
  }
}

TEST_CASE("twisted inequality and Lee identity on model fields") {
  const AxisBox cell{Vec3::Constant(-0.8), Vec3::Constant(0.8)};
  const auto bumps = random_bumps(6, cell, 0.2, 0.6, 3);
  const ConstantField one(1.0);
  CHECK(verify_twisted_inequality(one, bumps, 32).pass());
  CHECK(verify_lee_identity(one, bumps, 32).pass());

  const SlabCosineField slab(1.0);
  CHECK(verify_lee_identity(slab, bumps, 40).pass());
  CHECK(-slab.laplacian(Vec3(0.3, 0, 0)) / slab.value(Vec3(0.3, 0, 0)) ==
        doctest::Approx(kPi * kPi / 4.0));

  const QuadraticField quad(Vec3(0.1, 0.2, -0.1), Vec3(0.3, 0.5, 0.2), 1.0);
  CHECK(verify_twisted_inequality(quad, bumps, 40).pass());
  CHECK(verify_lee_identity(quad, bumps, 40).pass());

  std::vector<Bump> scaled = bumps;
  for (auto& b : scaled) b.amplitude *= 10.0;
  const IntegralReport r1 = verify_twisted_inequality(quad, bumps, 32);
  const IntegralReport r10 = verify_twisted_inequality(quad, scaled, 32);
  for (std::size_t i = 0; i < bumps.size(); ++i) {
    CHECK(r10.records[i].lhs == doctest::Approx(100.0 * r1.records[i].lhs));
    CHECK(r10.records[i].rhs == doctest::Approx(100.0 * r1.records[i].rhs));
  }
}
