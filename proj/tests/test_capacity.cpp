#include "capr/capacity.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace capr;

namespace {

CompactSample sphere(double r, int n, const Vec3& c = Vec3::Zero()) {
  return sample_compact(*make_ball(c, r), n);
}

// Minimum of w^T A w over the simplex by enumerating active sets.
double brute_force_energy(const Eigen::MatrixXd& A) {
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
    const double s = y.sum();
    if (!(s > 0.0)) continue;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(N);
    bool feasible = true;
    for (int i = 0; i < k; ++i) {
      w[S[i]] = y[i] / s;
      if (w[S[i]] < -1e-14) feasible = false;
    }
    if (!feasible) continue;
    const Eigen::VectorXd Aw = A * w;
    const double E = w.dot(Aw);
    for (int i = 0; i < N; ++i)
      if (!(mask & (1u << i)) && Aw[i] < E - 1e-12) feasible = false;
    if (feasible) best = std::min(best, E);
  }
  return best;
}

}  // namespace

TEST_CASE("kernel values") {
  CHECK(kernel(Vec3::Zero(), Vec3(2, 0, 0), 3) == doctest::Approx(0.5));
  CHECK(kernel(Vec3::Zero(), Vec3(0, 1, 0), 3) == doctest::Approx(1.0));
  CHECK(kernel(Vec3::Zero(), Vec3(0, 0, 2), 4) == doctest::Approx(0.25));
  try {
    kernel(Vec3::Ones(), Vec3::Ones(), 3);
    FAIL("expected singular_kernel");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::singular_kernel);
  }
}

TEST_CASE("energy quadrature") {
  const CompactSample two({Vec3::Zero(), Vec3(2, 0, 0)}, {0.1, 0.1}, "pair");
  CHECK(energy(DiscreteMeasure(two, {0.5, 0.5}), 3) == doctest::Approx(5.25));
  const CompactSample one({Vec3::Zero()}, {0.3}, "point");
  CHECK(energy(DiscreteMeasure(one, {1.0}), 3) == doctest::Approx(1.0 / 0.3));

  const double e500 = energy(DiscreteMeasure::uniform(sphere(1.0, 500)), 3);
  const double e2000 = energy(DiscreteMeasure::uniform(sphere(1.0, 2000)), 3);
  CHECK(std::abs(e2000 - 1.0) < std::abs(e500 - 1.0));
  CHECK(e2000 == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("simplex projection") {
  Eigen::VectorXd v(4);
  v << 0.3, -1.0, 2.0, 0.5;
  const Eigen::VectorXd w = project_to_simplex(v);
  CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(w.minCoeff() >= 0.0);
  // Closed form: threshold t with sum max(v - t, 0) = 1 gives t = 0.75.
  CHECK(w[2] == doctest::Approx(1.0));
  CHECK(w[0] == 0.0);
  Eigen::VectorXd u = Eigen::VectorXd::Constant(5, 0.2);
  CHECK((project_to_simplex(u) - u).norm() < 1e-15);
}

TEST_CASE("equilibrium matches active-set enumeration") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 6; ++trial) {
    const int N = 6 + trial;
    std::vector<Vec3> pts;
    while (int(pts.size()) < N) {
      const Vec3 p(u(rng), u(rng), u(rng));
      bool ok = true;
      for (const auto& q : pts) ok = ok && (p - q).norm() > 0.2;
      if (ok) pts.push_back(p);
    }
    const CompactSample K = CompactSample::with_default_radii(pts, 0.5, "random");
    const double oracle = brute_force_energy(kernel_matrix(K, 3));
    EquilibriumOptions o;
    o.tol = 1e-13;
    for (Optimizer opt : {Optimizer::projected_gradient, Optimizer::frank_wolfe}) {
      o.optimizer = opt;
      o.max_iterations = 200000;
      const EquilibriumResult r = equilibrium(K, 3, o);
      CHECK(std::abs(r.energy - oracle) <= 1e-6 * oracle);
    }
  }
}

TEST_CASE("iterates stay on the simplex") {
  EquilibriumOptions o;
  o.record_history = true;
  const EquilibriumResult r = equilibrium(sphere(1.0, 300), 3, o);
  CHECK(r.converged);
  CHECK(r.max_simplex_violation <= 1e-12);
  for (std::size_t i = 1; i < r.energy_history.size(); ++i)
    CHECK(r.energy_history[i] <= r.energy_history[i - 1] * (1.0 + 1e-14));
}

TEST_CASE("capacity of the unit sphere and its laws") {
  const CompactSample K = sphere(1.0, 2000);
  const EquilibriumResult r = equilibrium(K, 3);
  CHECK(r.capacity == doctest::Approx(1.0).epsilon(0.02));

  const EquilibriumResult half = equilibrium(K.transformed(0.5, Vec3::Zero()), 3);
  CHECK(half.capacity == doctest::Approx(0.5 * r.capacity).epsilon(0.01));
  const EquilibriumResult moved = equilibrium(K.transformed(1.0, Vec3(3, -1, 2)), 3);
  CHECK(std::abs(moved.capacity - r.capacity) <= 1e-12 * r.capacity);

  const DiscreteMeasure& mu = r.measure;
  CHECK(potential(mu, Vec3(2, 0, 0), 3) == doctest::Approx(0.5).epsilon(0.02));
  CHECK(potential(mu, Vec3(0, 0.5, 0), 3) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("maximum principle on a grid") {
  const CompactSample K = sample_compact(*make_box(Vec3::Zero(), Vec3(1, 0.5, 0.3)), 1600);
  const EquilibriumResult r = equilibrium(K, 3);
  double pmax = 0.0;
  for (int i = -10; i <= 20; ++i)
    for (int j = -10; j <= 15; ++j)
      for (int k = -10; k <= 13; ++k)
        pmax = std::max(pmax, potential(r.measure, Vec3(0.05 * i, 0.05 * j, 0.05 * k), 3));
  CHECK(pmax <= 1.02 * r.energy);
}

TEST_CASE("normalized potential") {
  const CompactSample K = sphere(0.1, 1000);
  const PotentialField g = normalized_potential(K, 3);
  for (const Vec3& p : K.points()) {
    CHECK(g(p) >= 0.95);
    CHECK(g(p) <= 1.05);
  }
  CHECK(g(Vec3(100, 0, 0)) <= 0.02);
}

TEST_CASE("subadditivity") {
  const CompactSample a = sphere(1.0, 800);
  const CompactSample b = sphere(1.0, 800, Vec3(10, 0, 0));
  const SubadditivityReport far = capacity_subadditivity_check({a, b}, 3);
  CHECK(far.pass);
  CHECK(far.union_capacity <= 2.04);
  CHECK(far.union_capacity >= 1.0);

  const SubadditivityReport dup = capacity_subadditivity_check({a, a}, 3);
  CHECK(dup.union_capacity == doctest::Approx(dup.part_capacities[0]).epsilon(1e-9));

  const double inner = equilibrium(sphere(0.5, 800), 3).capacity;
  CHECK(inner <= equilibrium(a, 3).capacity);
}

TEST_CASE("empty support has zero capacity") {
  const EquilibriumResult r = equilibrium(CompactSample{}, 3);
  CHECK(r.empty_support);
  CHECK(r.capacity == 0.0);
  CHECK(region_capacity(*make_punctures(nullptr, {Vec3::Zero()}), 100, 3) == 0.0);
}
