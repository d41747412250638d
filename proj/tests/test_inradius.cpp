#include "capr/inradius.hpp"

#include <doctest.h>

#include <cmath>

using namespace capr;

namespace {

Scene scene_of(NodePtr root) {
  return Scene{3, AxisBox{Vec3::Constant(-1.25), Vec3::Constant(1.25)}, std::move(root)};
}

}  // namespace

TEST_CASE("classical inradius of simple shapes") {
  const double h = 1.0 / 16.0;
  const NodePtr ball = make_ball(Vec3::Zero(), 1.0);
  CHECK(std::abs(classical_inradius(build_grid(scene_of(ball), h)) - 1.0) <= h);
  CHECK(std::abs(classical_inradius(build_grid(scene_of(make_box(Vec3::Constant(-1),
                                                                 Vec3::Constant(1))), h)) -
                 1.0) <= h);
  CHECK(std::abs(classical_inradius(build_grid(scene_of(make_punctures(ball, {Vec3::Zero()})), h)) -
                 1.0) <= h);
}

TEST_CASE("strict capacity inradius of the ball") {
  InradiusOptions o;
  o.eps_ladder = {1e-1, 1e-3};
  const Scene s = scene_of(make_ball(Vec3::Zero(), 1.0));
  const InradiusReport r = strict_capacity_inradius(s, o);
  REQUIRE(r.rho.size() == 2);
  CHECK(r.rho[0].radius >= r.rho[1].radius);
  CHECK(r.rho_estimate() == doctest::Approx(1.0).epsilon(0.05));

  std::vector<Vec3> punctures;
  for (int i = 0; i < 10; ++i)
    punctures.emplace_back(0.5 * std::cos(0.6 * i), 0.5 * std::sin(0.6 * i), 0.1 * (i - 5));
  const InradiusReport p =
      strict_capacity_inradius(scene_of(make_punctures(make_ball(Vec3::Zero(), 1.0), punctures)), o);
  for (std::size_t i = 0; i < r.rho.size(); ++i)
    CHECK(p.rho[i].radius == doctest::Approx(r.rho[i].radius).epsilon(1e-12));
}

TEST_CASE("capacity inradius and ordering") {
  InradiusOptions o;
  o.eps_ladder = {1e-1, 1e-3};
  const Scene s = scene_of(make_intersection(
      {make_ball(Vec3::Zero(), 1.0), make_complement(make_ball(Vec3::Zero(), 0.05))}));
  const InradiusReport r = inradius_report(s, 1e-3, o);
  CHECK(r.classical <= r.rho_estimate() + o.h);
  CHECK(r.rho_estimate() <= 1.0 + o.h);
  CHECK(r.rho_estimate() < 0.9);

  const RadiusPoint ball = capacity_inradius(scene_of(make_ball(Vec3::Zero(), 1.0)), 1e-3, o);
  CHECK(ball.radius == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("no complement in the box") {
  InradiusOptions o;
  o.eps_ladder = {1e-1};
  const Scene s{3, AxisBox{Vec3::Constant(-1), Vec3::Constant(1)},
                make_box(Vec3::Constant(-2), Vec3::Constant(2))};
  const InradiusReport r = strict_capacity_inradius(s, o);
  CHECK(r.unbounded_candidate);
  CHECK(r.rho_estimate() == doctest::Approx(r.r_max));
}

TEST_CASE("upper bound on the box") {
  InradiusOptions o;
  o.eps_ladder = {1e-1, 1e-3};
  const Scene box = scene_of(make_box(Vec3::Constant(-1), Vec3::Constant(1)));
  const UpperBoundReport u = verify_upper_bound(box, 1.0 / 16.0, o);
  CHECK(u.pass);
  CHECK(u.lambda == doctest::Approx(3.0 * kPi * kPi / 4.0).epsilon(0.02));
}

TEST_CASE("capacity inradius between shrinking lattice balls") {
  const NodePtr lattice =
      make_lattice_balls(1.0, 1.0, 5.0, Vec3::Zero(), RadiusLaw::inverse_index_norm);
  const Scene s{3, AxisBox{Vec3::Constant(-6), Vec3::Constant(6)}, make_complement(lattice)};
  InradiusOptions o;
  o.center_box = AxisBox{Vec3::Constant(1.0), Vec3::Constant(3.0)};
  const RadiusPoint r = capacity_inradius(s, 1e-3, o);

  // Largest clearance from the balls over centres in the box.
  const auto& l = std::get<LatticeBallsNode>(lattice->data());
  double oracle = 0.0;
  for (int a = 0; a <= 40; ++a)
    for (int b = 0; b <= 40; ++b)
      for (int c = 0; c <= 40; ++c) {
        const Vec3 x = Vec3::Constant(1.0) + Vec3(a, b, c) / 20.0;
        double clear = std::numeric_limits<double>::infinity();
        for (std::int64_t i = -5; i <= 5; ++i)
          for (std::int64_t j = -5; j <= 5; ++j)
            for (std::int64_t k = -5; k <= 5; ++k)
              if (l.has_site({i, j, k}))
                clear = std::min(clear, (x - l.site({i, j, k})).norm() - l.radius_at({i, j, k}));
        oracle = std::max(oracle, clear);
      }
  CHECK(std::abs(r.radius - oracle) <= o.h);
  CHECK(r.radius < std::sqrt(3.0) / 2.0);
}
