#pragma once

#include "capr/geometry.hpp"

#include <Eigen/Sparse>

#include <optional>
#include <utility>
#include <vector>

namespace capr {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// 7-point Dirichlet Laplacian on the interior nodes of a grid. Nodes outside
/// the mask are removed (homogeneous Dirichlet values).
struct LaplacianSystem {
  SparseMatrix matrix;
  std::vector<std::size_t> node_of_row;  ///< grid linear index per unknown
  std::vector<std::int64_t> row_of_node; ///< -1 for excluded nodes
};

LaplacianSystem assemble_laplacian(const Grid& grid);

struct EigenSolveOptions {
  double residual_tol = 1e-9;  ///< stop when |A v - theta v| <= tol * theta
  int max_outer = 10000;
  double inner_tol = 1e-12;
};

struct EigenPair {
  double value = 0.0;
  Eigen::VectorXd vector;  ///< unit 2-norm, nonnegative sum
  int outer_iterations = 0;
  double residual = 0.0;
};

/// Smallest eigenpair of an SPD matrix by inverse iteration with
/// preconditioned conjugate-gradient solves. Throws ErrorKind::not_converged.
EigenPair smallest_eigenpair(const SparseMatrix& A, const Eigen::VectorXd* start = nullptr,
                             const EigenSolveOptions& options = {});

double rayleigh_quotient(const SparseMatrix& A, const Eigen::VectorXd& v);

struct SpectralEstimate {
  std::vector<std::pair<double, double>> lambda_by_h;  ///< (h, eigenvalue), coarse to fine
  double extrapolated = 0.0;
  double error_estimate = 0.0;
  bool monotone = true;       ///< eigenvalues decrease under refinement
  bool upper_bound_only = false;  ///< D is cut off by the bounding box
  Grid finest_grid;
  Eigen::VectorXd eigenvector;   ///< on the finest grid's interior nodes
  std::vector<double> rayleigh_residual;  ///< per level, |q(v) - lambda| / lambda
};

/// lambda_1 at h, h/2, ..., h/2^refinements with h^2 Richardson extrapolation
/// of the two finest levels. Needs at least one refinement.
SpectralEstimate dirichlet_lambda1(const Grid& grid, int refinements = 1,
                                   const EigenSolveOptions& options = {});
SpectralEstimate dirichlet_lambda1(const Scene& scene, double h, int refinements = 1,
                                   const EigenSolveOptions& options = {});

/// lambda_1 on one grid, no extrapolation.
double grid_lambda1(const Grid& grid, const EigenSolveOptions& options = {});

/// True when the scene's set is not contained in its bounding box.
bool scene_is_truncated(const Scene& scene);

/// One checked relation: lhs compared to rhs.
struct LawCheck {
  std::string name;
  std::string anchor;
  double lhs = 0.0;
  double rhs = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct LawReport {
  std::vector<LawCheck> checks;
  std::vector<Vec3> punctures;
  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return !checks.empty();
  }
};

/// Scaling, translation, monotonicity and puncture checks for lambda_1.
LawReport law_checks(const Scene& scene, double r, const Vec3& shift, double h,
                     int puncture_count = 1);

struct ContinuityRow {
  double radius = 0.0;
  double capacity = 0.0;
  double lambda = 0.0;
  double gap = 0.0;  ///< |lambda - lambda(B)|
};

struct ContinuityReport {
  double lambda_ball = 0.0;
  std::vector<ContinuityRow> rows;
  bool capacity_decreasing = true;
  bool gap_decreasing = true;
  bool monotone_above_ball = true;  ///< every lambda(B \ K_j) >= lambda(B) (up to 1e-9)
  double final_relative_gap = 0.0;
  bool pass = false;  ///< the three trends hold and final gap < 5%
};

struct ContinuityOptions {
  Vec3 center = Vec3::Zero();
  double h = 1.0 / 24.0;
  int capacity_budget = 1000;
  std::uint64_t seed = kDefaultSeed;
};

/// lambda_1(B \ K_j) and cap(K_j) for closed balls K_j of the given radii.
ContinuityReport eigenvalue_continuity_experiment(const std::vector<double>& radii,
                                                  const ContinuityOptions& options = {});

}  // namespace capr
