#include "capr/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace capr {

double kernel_of_distance(double r, int n) {
  require(n >= 3, "kernel needs n >= 3");
  if (n == 3) return 1.0 / r;
  return std::pow(r, 2 - n);
}

double kernel(const Vec3& x, const Vec3& y, int n) {
  const double r = (x - y).norm();
  if (r == 0.0) throw Error(ErrorKind::singular_kernel, "singular kernel: x == y");
  return kernel_of_distance(r, n);
}

DiscreteMeasure::DiscreteMeasure(CompactSample support, std::vector<double> weights)
    : support_(std::move(support)), weights_(std::move(weights)) {
  require(weights_.size() == support_.size(), "weight count mismatch");
  double sum = 0.0;
  for (double w : weights_) {
    require(w >= 0.0, "measure weights must be nonnegative");
    sum += w;
  }
  require(weights_.empty() || std::abs(sum - 1.0) <= 1e-12, "measure weights must sum to 1");
}

DiscreteMeasure DiscreteMeasure::uniform(CompactSample support) {
  const std::size_t n = support.size();
  require(n > 0, "uniform measure needs a nonempty support");
  std::vector<double> w(n, 1.0 / double(n));
  return DiscreteMeasure(std::move(support), std::move(w));
}

Eigen::MatrixXd kernel_matrix(const CompactSample& sample, int n) {
  const auto& pts = sample.points();
  const auto& a = sample.patch_radius();
  const auto N = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd K(N, N);
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < N; ++j) {
    for (Eigen::Index i = 0; i < N; ++i) {
      K(i, j) = i == j ? kernel_of_distance(a[i], n)
                       : kernel_of_distance((pts[i] - pts[j]).norm(), n);
    }
  }
  return K;
}

double energy(const DiscreteMeasure& m, int n) {
  require(m.size() > 0, "energy needs a nonempty support");
  for (double a : m.support().patch_radius())
    if (!(a > 0.0)) throw Error(ErrorKind::invalid_patch_radius, "invalid patch radius");
  const auto& pts = m.support().points();
  const auto& a = m.support().patch_radius();
  const auto& w = m.weights();
  double sum = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double row = w[i] * kernel_of_distance(a[i], n);
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (j != i) row += w[j] * kernel_of_distance((pts[i] - pts[j]).norm(), n);
    sum += w[i] * row;
  }
  return sum;
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const auto N = v.size();
  require(N > 0, "projection needs a nonempty vector");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return v[a] > v[b]; });
  double cumulative = 0.0;
  double threshold = 0.0;
  for (Eigen::Index k = 0; k < N; ++k) {
    cumulative += v[order[static_cast<std::size_t>(k)]];
    const double t = (cumulative - 1.0) / double(k + 1);
    if (v[order[static_cast<std::size_t>(k)]] - t > 0.0) threshold = t;
  }
  Eigen::VectorXd w = (v.array() - threshold).max(0.0);
  // Renormalize the active set exactly onto sum 1.
  const double s = w.sum();
  if (s > 0.0) w /= s;
  return w;
}

namespace {

double simplex_violation(const Eigen::VectorXd& w) {
  return std::max(std::abs(w.sum() - 1.0), std::max(0.0, -w.minCoeff()));
}

EquilibriumResult finish(const CompactSample& K, const Eigen::VectorXd& w, double E, int it,
                         bool converged, double violation, std::vector<double> history) {
  EquilibriumResult r;
  std::vector<double> weights(w.data(), w.data() + w.size());
  r.measure = DiscreteMeasure(K, std::move(weights));
  r.energy = E;
  r.capacity = 1.0 / E;
  r.iterations = it;
  r.converged = converged;
  r.max_simplex_violation = violation;
  r.energy_history = std::move(history);
  return r;
}

}  // namespace

EquilibriumResult equilibrium(const CompactSample& K, int n, const EquilibriumOptions& opt) {
  require(opt.tol > 0.0, "tolerance must be positive");
  if (K.empty()) {
    EquilibriumResult r;
    r.energy = std::numeric_limits<double>::infinity();
    r.capacity = 0.0;
    r.converged = true;
    r.empty_support = true;
    return r;
  }
  const Eigen::MatrixXd A = kernel_matrix(K, n);
  const auto N = A.rows();
  Eigen::VectorXd w = Eigen::VectorXd::Constant(N, 1.0 / double(N));
  Eigen::VectorXd Aw = A * w;
  double E = w.dot(Aw);
  double violation = simplex_violation(w);
  std::vector<double> history;
  if (opt.record_history) history.push_back(E);

  int small_steps = 0;
  int it = 0;
  bool converged = false;

  if (opt.optimizer == Optimizer::projected_gradient) {
    constexpr double armijo = 1e-4;
    double step = 1.0 / A.cwiseAbs().colwise().sum().maxCoeff();
    for (it = 1; it <= opt.max_iterations; ++it) {
      const Eigen::VectorXd g = 2.0 * Aw;
      double t = step;
      Eigen::VectorXd w_new, Aw_new;
      double E_new = E;
      bool accepted = false;
      for (int halvings = 0; halvings < 80; ++halvings, t *= 0.5) {
        w_new = project_to_simplex(w - t * g);
        Aw_new = A * w_new;
        E_new = w_new.dot(Aw_new);
        if (E_new <= E + armijo * g.dot(w_new - w)) {
          accepted = true;
          break;
        }
      }
      if (!accepted || E_new > E) {
        // No descent direction left at floating-point resolution.
        converged = true;
        break;
      }
      const double rel = (E - E_new) / E;
      w = std::move(w_new);
      Aw = std::move(Aw_new);
      E = E_new;
      violation = std::max(violation, simplex_violation(w));
      if (opt.record_history) history.push_back(E);
      step = 2.0 * t;
      small_steps = rel < opt.tol ? small_steps + 1 : 0;
      if (small_steps >= 5) {
        converged = true;
        break;
      }
    }
  } else {
    for (it = 1; it <= opt.max_iterations; ++it) {
      Eigen::Index i = 0;
      Aw.minCoeff(&i);
      // Exact line search along e_i - w.
      const Eigen::VectorXd Ad = A.col(i) - Aw;
      const double wAd = Aw[i] - E;  // w . A (e_i - w)
      const double dAd = A(i, i) - 2.0 * Aw[i] + E;
      double gamma = dAd > 0.0 ? std::clamp(-wAd / dAd, 0.0, 1.0) : 0.0;
      const double E_new = E + 2.0 * gamma * wAd + gamma * gamma * dAd;
      if (!(E_new < E)) gamma = 0.0;
      const double rel = gamma > 0.0 ? (E - E_new) / E : 0.0;
      if (gamma > 0.0) {
        w *= (1.0 - gamma);
        w[i] += gamma;
        Aw += gamma * Ad;
        E = w.dot(Aw);
      }
      violation = std::max(violation, simplex_violation(w));
      if (opt.record_history) history.push_back(E);
      small_steps = rel < opt.tol ? small_steps + 1 : 0;
      if (small_steps >= 5) {
        converged = true;
        break;
      }
    }
    w = w.cwiseMax(0.0);
    w /= w.sum();
    E = w.dot(A * w);
  }
  return finish(K, w, E, std::min(it, opt.max_iterations), converged, violation,
                std::move(history));
}

double potential(const DiscreteMeasure& m, const Vec3& x, int n) {
  const auto& pts = m.support().points();
  const auto& a = m.support().patch_radius();
  const auto& w = m.weights();
  double p = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    p += w[i] * kernel_of_distance(std::max((x - pts[i]).norm(), a[i]), n);
  return p;
}

Vec3 potential_gradient(const DiscreteMeasure& m, const Vec3& x, int n) {
  const auto& pts = m.support().points();
  const auto& a = m.support().patch_radius();
  const auto& w = m.weights();
  Vec3 g = Vec3::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3 d = x - pts[i];
    const double r = d.norm();
    if (r <= a[i]) continue;
    g -= w[i] * double(n - 2) * std::pow(r, -n) * d;
  }
  return g;
}

PotentialField normalized_potential(const CompactSample& K, int n,
                                    const EquilibriumOptions& options) {
  const EquilibriumResult r = equilibrium(K, n, options);
  if (r.empty_support) throw Error(ErrorKind::empty_compact_set, "empty compact set");
  if (!r.converged)
    throw Error(ErrorKind::not_converged, "equilibrium solve did not converge");
  return PotentialField(r.measure, 1.0 / r.energy, n);
}

SubadditivityReport capacity_subadditivity_check(const std::vector<CompactSample>& parts, int n,
                                                 const EquilibriumOptions& options) {
  require(parts.size() >= 2, "subadditivity needs at least two parts");
  SubadditivityReport rep;
  for (const auto& p : parts) {
    rep.part_capacities.push_back(equilibrium(p, n, options).capacity);
    rep.sum_of_parts += rep.part_capacities.back();
  }
  const CompactSample u = CompactSample::merged(parts, "union");
  rep.union_capacity = equilibrium(u, n, options).capacity;
  rep.pass = rep.union_capacity <= 1.02 * rep.sum_of_parts;
  return rep;
}

double region_capacity(const SceneNode& region, int budget, int n, const SampleOptions& sampling,
                       const EquilibriumOptions& options) {
  CompactSample K;
  try {
    K = sample_compact(region, budget, sampling);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::empty_compact_set) return 0.0;
    throw;
  }
  return equilibrium(K, n, options).capacity;
}

CapacityTrend capacity_trend(const SceneNode& region, int budget, int n,
                             const SampleOptions& sampling, const EquilibriumOptions& options) {
  CapacityTrend t;
  t.coarse_budget = budget;
  t.fine_budget = 4 * budget;
  t.coarse = region_capacity(region, t.coarse_budget, n, sampling, options);
  t.fine = region_capacity(region, t.fine_budget, n, sampling, options);
  t.polar_candidate = t.coarse == 0.0 || t.fine == 0.0 || t.fine < 0.25 * t.coarse;
  return t;
}

}  // namespace capr
