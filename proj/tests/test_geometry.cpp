#include "capr/geometry.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace capr;

namespace {

Scene ball_scene(NodePtr root) {
  return Scene{3, AxisBox{Vec3::Constant(-1.0), Vec3::Constant(1.0)}, std::move(root)};
}

// Lattice points h * Z^3 strictly inside the unit ball, counted directly.
int count_ball_nodes(double h, bool drop_origin) {
  const int k = static_cast<int>(std::ceil(1.0 / h));
  int count = 0;
  for (int i = -k; i <= k; ++i)
    for (int j = -k; j <= k; ++j)
      for (int l = -k; l <= k; ++l) {
        const double r2 = h * h * double(i * i + j * j + l * l);
        if (r2 >= 1.0) continue;
        if (drop_origin && i == 0 && j == 0 && l == 0) continue;
        ++count;
      }
  return count;
}

}  // namespace

TEST_CASE("build_grid enumerates the open ball") {
  const Grid g = build_grid(ball_scene(make_ball(Vec3::Zero(), 1.0)), 0.5);
  CHECK(g.interior_count() == std::size_t(count_ball_nodes(0.5, false)));
  CHECK(g.interior_count() == 27);

  const Grid p = build_grid(
      ball_scene(make_punctures(make_ball(Vec3::Zero(), 1.0), {Vec3::Zero()})), 0.5);
  CHECK(p.interior_count() == std::size_t(count_ball_nodes(0.5, true)));

  const Grid fine = build_grid(ball_scene(make_ball(Vec3::Zero(), 1.0)), 0.25);
  CHECK(fine.interior_count() == std::size_t(count_ball_nodes(0.25, false)));
}

TEST_CASE("build_grid rejects an empty scene") {
  const Scene s = ball_scene(make_ball(Vec3::Constant(5.0), 0.1));
  try {
    build_grid(s, 0.5);
    FAIL("expected grid_too_coarse");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::grid_too_coarse);
  }
}

TEST_CASE("signed distance sign matches membership") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const std::vector<NodePtr> prims{make_ball(Vec3(0.1, -0.2, 0.3), 0.8),
                                   make_box(Vec3(-0.5, -1.0, -0.2), Vec3(1.0, 0.4, 0.9)),
                                   make_halfspace(Vec3(1.0, 2.0, -1.0), 0.3)};
  for (const auto& node : prims) {
    int mismatches = 0;
    for (int i = 0; i < 10000; ++i) {
      const Vec3 x(u(rng), u(rng), u(rng));
      const double d = node->signed_distance(x);
      if (d == 0.0) continue;
      if ((d < 0.0) != node->contains(x)) ++mismatches;
    }
    CHECK(mismatches == 0);
  }
}

TEST_CASE("sphere sample has the requested size and spacing") {
  const CompactSample s = sample_compact(*make_ball(Vec3::Zero(), 1.0), 500);
  REQUIRE(s.size() == 500);
  const double expected = std::sqrt(4.0 * kPi / 500.0) / 2.0;
  double mean = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s.points()[i].norm() == doctest::Approx(1.0).epsilon(1e-12));
    mean += s.patch_radius()[i];
  }
  mean /= double(s.size());
  CHECK(mean == doctest::Approx(expected).epsilon(0.2));
}

TEST_CASE("box sample stays in the closed box with distinct points") {
  const CompactSample s = sample_compact(*make_box(Vec3::Zero(), Vec3::Ones()), 1000);
  CHECK(s.size() <= 1000);
  CHECK(s.size() > 100);
  const AxisBox box{Vec3::Zero(), Vec3::Ones()};
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(box.inflated(1e-12).contains(s.points()[i]));
    for (std::size_t j = 0; j < i; ++j) REQUIRE(s.points()[i] != s.points()[j]);
  }
}

TEST_CASE("a bare point set samples to nothing") {
  const NodePtr pt = make_punctures(nullptr, {Vec3::Zero()});
  try {
    sample_compact(*pt, 100);
    FAIL("expected empty_compact_set");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::empty_compact_set);
  }
}

TEST_CASE("smooth union closed forms") {
  const double eps = 0.3;
  CHECK(smooth_union_value(0.0, 0.0, eps) == doctest::Approx(-eps / 2.0));
  CHECK(smooth_union_value(3.0, 1.0, eps) == doctest::Approx(1.0));
  CHECK(smooth_union_value(1.0, 3.0, eps) == doctest::Approx(1.0));
  CHECK(chi(0.0, eps) == doctest::Approx(1.0));
  CHECK(chi(eps * eps, eps) == 0.0);
  double prev = 1.0;
  for (int i = 1; i < 50; ++i) {
    const double v = chi(eps * eps * i / 50.0, eps);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("smooth union of transversal balls has a regular zero set") {
  const Vec3 c1(-0.5, 0, 0), c2(0.5, 0, 0);
  DefiningFunctionPair pair{[c1](const Vec3& x) { return (x - c1).norm() - 1.0; },
                            [c2](const Vec3& x) { return (x - c2).norm() - 1.0; }, 0.2};
  const auto R = [&](const Vec3& x) { return smooth_union(pair, x); };
  int samples = 0;
  for (int i = 0; i < 64; ++i) {
    const double t = 2.0 * kPi * i / 64.0;
    const Vec3 dir(std::cos(t), std::sin(t), 0.3 * std::sin(3 * t));
    double lo = 0.0, hi = 3.0;
    for (int k = 0; k < 80; ++k) {
      const double mid = 0.5 * (lo + hi);
      (R(mid * dir.normalized()) < 0.0 ? lo : hi) = mid;
    }
    const Vec3 x = lo * dir.normalized();
    CHECK(numerical_gradient(R, x, 1e-6).norm() > 0.1);
    ++samples;
  }
  CHECK(samples == 64);
  const TransversalityReport tr =
      check_transversality(pair, AxisBox{Vec3::Constant(-2), Vec3::Constant(2)}, 40);
  CHECK(tr.samples > 0);
  CHECK_FALSE(tr.near_tangent);
}

TEST_CASE("lattice cubes tile space") {
  const AxisBox q0 = lattice_cube(1.0, {0, 0, 0});
  CHECK(q0.lo == Vec3::Constant(-1.0));
  CHECK(q0.hi == Vec3::Constant(1.0));
  const AxisBox q1 = lattice_cube(1.0, {1, 0, 0});
  CHECK(q1.lo == Vec3(1, -1, -1));
  CHECK(q1.hi == Vec3(3, 1, 1));
  CHECK(q0.intersect(q1).volume() == 0.0);
  CHECK_FALSE(q0.intersect(q1).empty());
  CHECK(cube_index(1.0, Vec3(2.5, 0.2, -0.7)) == Index3{1, 0, 0});
}

TEST_CASE("punctures are excluded from membership") {
  const NodePtr n = make_punctures(make_ball(Vec3::Zero(), 1.0), {Vec3::Zero()});
  CHECK_FALSE(n->contains(Vec3::Zero()));
  CHECK(n->contains(Vec3(0.1, 0, 0)));
  CHECK(n->closure_contains(Vec3::Zero()));
}

TEST_CASE("lattice distance equals the minimum over all sites") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  for (RadiusLaw law : {RadiusLaw::constant, RadiusLaw::inverse_index_norm}) {
    const double spacing = law == RadiusLaw::constant ? 2.0 : 1.0;
    const double radius = law == RadiusLaw::constant ? 0.25 : 1.0;
    const NodePtr node = make_lattice_balls(spacing, radius, 5.0, Vec3::Zero(), law);
    const auto& l = std::get<LatticeBallsNode>(node->data());
    for (int t = 0; t < 2000; ++t) {
      const Vec3 x(u(rng), u(rng), u(rng));
      double exact = std::numeric_limits<double>::infinity();
      for (std::int64_t i = -6; i <= 6; ++i)
        for (std::int64_t j = -6; j <= 6; ++j)
          for (std::int64_t k = -6; k <= 6; ++k)
            if (l.has_site({i, j, k}))
              exact = std::min(exact, (x - l.site({i, j, k})).norm() - l.radius_at({i, j, k}));
      const double d = node->signed_distance(x);
      // Exact near the balls; a lower bound once every ball is far away.
      CHECK(d <= exact + 1e-12);
      if (exact < spacing) CHECK(d == doctest::Approx(exact).epsilon(1e-12));
    }
  }
}
