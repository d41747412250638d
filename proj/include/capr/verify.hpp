#pragma once

#include "capr/geometry.hpp"
#include "capr/report.hpp"
#include "capr/spectral.hpp"

#include <vector>

namespace capr {

struct VerifyOptions {
  double h = 1.0 / 12.0;        ///< law-check grid; the upper-bound check uses h / 2
  int budget = 1000;
  double M = 1.0;
  int shells = 2;
  int bumps = 20;
  std::vector<double> continuity_radii{0.2, 0.1, 0.05};
  Vec3 continuity_center{0.5, 0.0, 0.0};
  std::uint64_t seed = kDefaultSeed;
};

struct VerifyReport {
  std::vector<LawCheck> records;  ///< sorted by name
  bool pass() const;
};

/// Capacity laws, lambda_1 laws, maximum principle, the inradius upper bound,
/// eigenvalue continuity, the certificate chain and the scalar identities.
/// A check that cannot run records its error message in the anchor-tagged
/// record and fails.
VerifyReport run_verify(const Scene& scene, const VerifyOptions& options = {});

Table verify_table(const VerifyReport& report);

/// Every anchor string used by run_verify.
const std::vector<std::string>& verify_anchors();

}  // namespace capr
