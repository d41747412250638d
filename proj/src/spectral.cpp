#include "capr/spectral.hpp"

#include "capr/capacity.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <cmath>

namespace capr {

LaplacianSystem assemble_laplacian(const Grid& grid) {
  LaplacianSystem sys;
  const std::size_t n = grid.node_count();
  sys.row_of_node.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i)
    if (grid.interior[i]) {
      sys.row_of_node[i] = static_cast<std::int64_t>(sys.node_of_row.size());
      sys.node_of_row.push_back(i);
    }
  const auto rows = static_cast<Eigen::Index>(sys.node_of_row.size());
  const double inv_h2 = 1.0 / (grid.h * grid.h);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(rows) * 7);
  const std::array<std::int64_t, 3> stride{1, grid.dims[0], grid.dims[0] * grid.dims[1]};
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto node = static_cast<std::int64_t>(sys.node_of_row[static_cast<std::size_t>(r)]);
    const std::int64_t idx[3] = {node % grid.dims[0], (node / grid.dims[0]) % grid.dims[1],
                                 node / (grid.dims[0] * grid.dims[1])};
    triplets.emplace_back(r, r, 6.0 * inv_h2);
    for (int a = 0; a < 3; ++a)
      for (int s : {-1, 1}) {
        const std::int64_t c = idx[a] + s;
        if (c < 0 || c >= grid.dims[a]) continue;
        const std::int64_t nb = sys.row_of_node[static_cast<std::size_t>(node + s * stride[a])];
        if (nb >= 0) triplets.emplace_back(r, static_cast<Eigen::Index>(nb), -inv_h2);
      }
  }
  sys.matrix.resize(rows, rows);
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  sys.matrix.makeCompressed();
  return sys;
}

double rayleigh_quotient(const SparseMatrix& A, const Eigen::VectorXd& v) {
  return v.dot(A * v) / v.squaredNorm();
}

EigenPair smallest_eigenpair(const SparseMatrix& A, const Eigen::VectorXd* start,
                             const EigenSolveOptions& opt) {
  const auto n = A.rows();
  require(n > 0, "empty operator");
  using ColMatrix = Eigen::SparseMatrix<double>;
  using Solver = Eigen::ConjugateGradient<ColMatrix, Eigen::Lower | Eigen::Upper,
                                          Eigen::DiagonalPreconditioner<double>>;
  ColMatrix shifted = A;
  Solver cg;
  cg.setMaxIterations(std::max<Eigen::Index>(1000, 4 * n));
  cg.compute(shifted);
  if (cg.info() != Eigen::Success)
    throw Error(ErrorKind::not_converged, "preconditioner factorization failed");

  Eigen::VectorXd v = start && start->size() == n ? *start : Eigen::VectorXd::Ones(n);
  if (v.norm() == 0.0) v.setOnes();
  v.normalize();
  Eigen::VectorXd Av = A * v;
  double theta = v.dot(Av);
  double res = (Av - theta * v).norm();
  double sigma = 0.0;
  Eigen::VectorXd y = v / theta;

  EigenPair out;
  for (int it = 1; it <= opt.max_outer; ++it) {
    // Once the Rayleigh quotient is close, shift to 0.8 theta. theta >= lambda_1
    // always, and a relative residual below 0.05 keeps lambda_1 above the shift.
    if (sigma == 0.0 && res < 0.05 * theta) {
      sigma = 0.8 * theta;
      ColMatrix I(n, n);
      I.setIdentity();
      shifted = ColMatrix(A) - sigma * I;
      cg.compute(shifted);
      if (cg.info() != Eigen::Success)
        throw Error(ErrorKind::not_converged, "preconditioner factorization failed");
      y = v / (theta - sigma);
    }
    cg.setTolerance(std::max(opt.inner_tol, std::min(1e-6, 1e-3 * res / theta)));
    y = cg.solveWithGuess(v, y);
    const double ny = y.norm();
    if (!(ny > 0.0) || !std::isfinite(ny))
      throw Error(ErrorKind::not_converged, "inverse iteration broke down");
    v = y / ny;
    Av = A * v;
    theta = v.dot(Av);
    res = (Av - theta * v).norm();
    y = v / (theta - sigma);
    out.outer_iterations = it;
    out.residual = res;
    if (res <= opt.residual_tol * theta) {
      if (v.sum() < 0.0) v = -v;
      out.value = theta;
      out.vector = std::move(v);
      return out;
    }
  }
  throw Error(ErrorKind::not_converged, "inverse iteration did not converge");
}

namespace {

// Trilinear prolongation of a coarse interior vector onto the h/2 grid.
Eigen::VectorXd prolongate(const Grid& coarse, const LaplacianSystem& cs,
                           const Eigen::VectorXd& v, const Grid& fine,
                           const LaplacianSystem& fs) {
  const auto value = [&](std::int64_t gi, std::int64_t gj, std::int64_t gk) {
    const std::int64_t i = gi - coarse.first[0], j = gj - coarse.first[1],
                       k = gk - coarse.first[2];
    if (i < 0 || j < 0 || k < 0 || i >= coarse.dims[0] || j >= coarse.dims[1] ||
        k >= coarse.dims[2])
      return 0.0;
    const std::int64_t r = cs.row_of_node[coarse.linear(i, j, k)];
    return r >= 0 ? v[r] : 0.0;
  };
  const auto floor_div2 = [](std::int64_t a) { return a >= 0 ? a / 2 : -((-a + 1) / 2); };
  Eigen::VectorXd out(static_cast<Eigen::Index>(fs.node_of_row.size()));
  for (std::size_t r = 0; r < fs.node_of_row.size(); ++r) {
    const auto node = static_cast<std::int64_t>(fs.node_of_row[r]);
    const std::int64_t g[3] = {fine.first[0] + node % fine.dims[0],
                               fine.first[1] + (node / fine.dims[0]) % fine.dims[1],
                               fine.first[2] + node / (fine.dims[0] * fine.dims[1])};
    double acc = 0.0;
    int count = 0;
    const std::int64_t lo[3] = {floor_div2(g[0]), floor_div2(g[1]), floor_div2(g[2])};
    const std::int64_t hi[3] = {lo[0] + (g[0] & 1), lo[1] + (g[1] & 1), lo[2] + (g[2] & 1)};
    for (std::int64_t a = lo[0]; a <= hi[0]; ++a)
      for (std::int64_t b = lo[1]; b <= hi[1]; ++b)
        for (std::int64_t c = lo[2]; c <= hi[2]; ++c) {
          acc += value(a, b, c);
          ++count;
        }
    out[static_cast<Eigen::Index>(r)] = acc / count;
  }
  return out;
}

}  // namespace

double grid_lambda1(const Grid& grid, const EigenSolveOptions& options) {
  require(grid.interior_count() >= 8, "need at least 8 interior nodes");
  const LaplacianSystem sys = assemble_laplacian(grid);
  return smallest_eigenpair(sys.matrix, nullptr, options).value;
}

bool scene_is_truncated(const Scene& scene) {
  const auto b = scene.root->bounds();
  if (!b) return true;
  return !(scene.bounding_box.contains(b->lo) && scene.bounding_box.contains(b->hi));
}

SpectralEstimate dirichlet_lambda1(const Grid& grid, int refinements,
                                   const EigenSolveOptions& options) {
  require(refinements >= 1, "need at least one refinement");
  require(grid.interior_count() >= 8, "need at least 8 interior nodes");
  SpectralEstimate est;
  est.upper_bound_only = scene_is_truncated(grid.scene);

  Grid current = grid;
  LaplacianSystem sys = assemble_laplacian(current);
  EigenPair pair = smallest_eigenpair(sys.matrix, nullptr, options);
  const auto record = [&](const Grid& g, const LaplacianSystem& s, const EigenPair& p) {
    est.lambda_by_h.emplace_back(g.h, p.value);
    const double q = rayleigh_quotient(s.matrix, p.vector);
    est.rayleigh_residual.push_back(std::abs(q - p.value) / p.value);
  };
  record(current, sys, pair);

  for (int level = 1; level <= refinements; ++level) {
    Grid fine = build_grid(current.scene, 0.5 * current.h);
    LaplacianSystem fsys = assemble_laplacian(fine);
    const Eigen::VectorXd guess = prolongate(current, sys, pair.vector, fine, fsys);
    pair = smallest_eigenpair(fsys.matrix, &guess, options);
    record(fine, fsys, pair);
    current = std::move(fine);
    sys = std::move(fsys);
  }

  for (std::size_t i = 1; i < est.lambda_by_h.size(); ++i)
    if (est.lambda_by_h[i].second > est.lambda_by_h[i - 1].second) est.monotone = false;
  const double coarse = est.lambda_by_h[est.lambda_by_h.size() - 2].second;
  const double fine = est.lambda_by_h.back().second;
  est.extrapolated = (4.0 * fine - coarse) / 3.0;
  est.error_estimate = std::abs(coarse - fine) / 3.0;
  est.eigenvector = pair.vector;
  est.finest_grid = std::move(current);
  return est;
}

SpectralEstimate dirichlet_lambda1(const Scene& scene, double h, int refinements,
                                   const EigenSolveOptions& options) {
  return dirichlet_lambda1(build_grid(scene, h), refinements, options);
}

namespace {

// Deepest interior node by signed distance; ties go to the lowest index.
std::size_t deepest_node(const Grid& g) {
  std::size_t best = 0;
  double depth = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (!g.interior[i]) continue;
    const double d = -g.scene.signed_distance(g.point(i));
    if (d > depth) {
      depth = d;
      best = i;
    }
  }
  return best;
}

LawCheck make_check(std::string name, std::string anchor, double lhs, double rhs, double tol,
                    bool pass) {
  return LawCheck{std::move(name), std::move(anchor), lhs, rhs, tol, pass};
}

}  // namespace

LawReport law_checks(const Scene& scene, double r, const Vec3& shift, double h,
                     int puncture_count) {
  require(r > 0.0, "scale factor must be positive");
  require(puncture_count >= 1 && puncture_count <= 5, "puncture count must be in 1..5");
  LawReport rep;
  const Grid g = build_grid(scene, h);
  const double lam = grid_lambda1(g);

  // Scaling: rD sampled on the scaled lattice r h Z^3.
  const double lam_scaled = grid_lambda1(build_grid(scene.scaled(r), r * h));
  rep.checks.push_back(make_check("scaling", "r^2 lambda1(rD) = lambda1(D)", r * r * lam_scaled,
                                  lam, 0.02,
                                  std::abs(r * r * lam_scaled - lam) <= 0.02 * lam));

  // Translation: extrapolated values absorb the lattice jitter.
  const double ext = dirichlet_lambda1(g, 1).extrapolated;
  const double ext_shifted = dirichlet_lambda1(scene.translated(shift), h, 1).extrapolated;
  rep.checks.push_back(make_check("translation", "lambda1(D) = lambda1(D + x)", ext_shifted, ext,
                                  0.02, std::abs(ext_shifted - ext) <= 0.02 * ext));

  // Monotonicity: D' = D intersected with a 0.9 copy of D about its deepest node.
  const Vec3 c = g.point(deepest_node(g));
  Scene sub = scene;
  sub.root = make_intersection({scene.root, scene.root->transformed(0.9, 0.1 * c)});
  const double lam_sub = grid_lambda1(build_grid(sub, h));
  rep.checks.push_back(make_check("monotonicity", "lambda1(D) <= lambda1(D')", lam, lam_sub, 0.0,
                                  lam <= lam_sub));

  // Punctures on coarse lattice nodes deep inside D.
  const std::array<Vec3, 5> offsets{Vec3::Zero(), Vec3(2, 0, 0), Vec3(-2, 0, 0), Vec3(0, 2, 0),
                                    Vec3(0, -2, 0)};
  for (const auto& o : offsets) {
    if (static_cast<int>(rep.punctures.size()) >= puncture_count) break;
    const Vec3 p = c + h * o;
    if (scene.signed_distance(p) < -2.0 * h) rep.punctures.push_back(p);
  }
  if (rep.punctures.empty()) rep.punctures.push_back(c);
  Scene punctured = scene;
  punctured.root = make_punctures(scene.root, rep.punctures);
  const double lam_half = grid_lambda1(build_grid(scene, 0.5 * h));
  const double dev_h = grid_lambda1(build_grid(punctured, h)) - lam;
  const double dev_half = grid_lambda1(build_grid(punctured, 0.5 * h)) - lam_half;
  rep.checks.push_back(make_check("puncture_refinement",
                                  "D \\ D' polar => lambda1(D) = lambda1(D')", dev_half, dev_h,
                                  0.0, std::abs(dev_half) < std::abs(dev_h)));
  return rep;
}

ContinuityReport eigenvalue_continuity_experiment(const std::vector<double>& radii,
                                                  const ContinuityOptions& opt) {
  for (std::size_t i = 0; i < radii.size(); ++i) {
    require(radii[i] > 0.0 && radii[i] < 0.5, "radii must lie in (0, 1/2)");
    require(i == 0 || radii[i] < radii[i - 1], "radii must be decreasing");
  }
  ContinuityReport rep;
  Scene ball;
  ball.bounding_box = {Vec3::Constant(-1.0), Vec3::Constant(1.0)};
  ball.root = make_ball(Vec3::Zero(), 1.0);
  rep.lambda_ball = dirichlet_lambda1(ball, opt.h, 1).extrapolated;

  for (double r : radii) {
    ContinuityRow row;
    row.radius = r;
    const NodePtr obstacle = make_ball(opt.center, r);
    const CompactSample K = sample_compact(*obstacle, opt.capacity_budget, SampleOptions{opt.seed, {}, {}});
    row.capacity = equilibrium(K, 3).capacity;
    Scene d = ball;
    d.root = make_intersection({ball.root, make_complement(obstacle)});
    row.lambda = dirichlet_lambda1(d, opt.h, 1).extrapolated;
    row.gap = std::abs(row.lambda - rep.lambda_ball);
    rep.rows.push_back(row);
  }
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    if (rep.rows[i].lambda < rep.lambda_ball * (1.0 - 1e-9)) rep.monotone_above_ball = false;
    if (i == 0) continue;
    if (!(rep.rows[i].capacity < rep.rows[i - 1].capacity)) rep.capacity_decreasing = false;
    if (!(rep.rows[i].gap < rep.rows[i - 1].gap)) rep.gap_decreasing = false;
  }
  rep.final_relative_gap = rep.rows.empty() ? 0.0 : rep.rows.back().gap / rep.lambda_ball;
  rep.pass = rep.capacity_decreasing && rep.gap_decreasing && rep.monotone_above_ball &&
             rep.final_relative_gap < 0.05;
  return rep;
}

}  // namespace capr
