#include "capr/verify.hpp"

#include "capr/capacity.hpp"
#include "capr/inradius.hpp"
#include "capr/subharmonic.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace capr {

namespace anchor {
const char* const cap_scaling = "cap(rE) = r^{n-2} cap(E)";
const char* const cap_translation = "cap(E + x) = cap(E)";
const char* const cap_subadditive = "cap(E) <= sum_i cap(E_i)";
const char* const max_principle = "p_mu(x) <= I(mu) for all x";
const char* const upper_bound = "lambda1(D) <= lambda1(B) rho_D^{-2}";
const char* const continuity = "lim lambda1(D_j) = lambda1(B) when cap(K_j) -> 0";
const char* const floor = "Delta phi >= c on D";
const char* const floor_identity =
    "Delta e^{-4/(delta p)} = e^{-4/(delta p)} (8/(delta p^3)) |grad p|^2 (2/(delta p) - 1)";
const char* const hormander = "lambda1(D) >= c e^{m-M}";
const char* const lee = "lambda1(D) >= c / (M~ - m)";
const char* const twisted = "int Delta phi w^2 e^{phi-M} <= int |grad w|^2";
const char* const lee_identity = "int (w^2 Delta phi / phi + |grad w|^2) = int phi^2 |grad(w/phi)|^2";
}  // namespace anchor

const std::vector<std::string>& verify_anchors() {
  static const std::vector<std::string> all{
      anchor::cap_scaling, anchor::cap_translation, anchor::cap_subadditive,
      anchor::max_principle, anchor::upper_bound, anchor::continuity,
      anchor::floor, anchor::floor_identity, anchor::hormander,
      anchor::lee, anchor::twisted, anchor::lee_identity,
      "r^2 lambda1(rD) = lambda1(D)", "lambda1(D) = lambda1(D + x)",
      "lambda1(D) <= lambda1(D')", "D \\ D' polar => lambda1(D) = lambda1(D')"};
  return all;
}

bool VerifyReport::pass() const {
  return !records.empty() &&
         std::all_of(records.begin(), records.end(), [](const LawCheck& c) { return c.pass; });
}

namespace {

void guarded(VerifyReport& rep, const std::string& name, const char* anchor,
             const std::function<void()>& body) {
  try {
    body();
  } catch (const Error& e) {
    rep.records.push_back(LawCheck{name + ": " + e.what(), anchor, NAN, NAN, 0.0, false});
  }
}

void add(VerifyReport& rep, std::string name, const char* anchor, double lhs, double rhs,
         double tol, bool pass) {
  rep.records.push_back(LawCheck{std::move(name), anchor, lhs, rhs, tol, pass});
}

}  // namespace

VerifyReport run_verify(const Scene& scene, const VerifyOptions& opt) {
  VerifyReport rep;
  const SampleOptions sampling{opt.seed, scene.bounding_box, {}};

  guarded(rep, "capacity", anchor::cap_scaling, [&] {
    const CompactSample K = sample_compact(*scene.root, opt.budget, sampling);
    const EquilibriumResult base = equilibrium(K, scene.dimension);
    const double cap2 = equilibrium(K.transformed(2.0, Vec3::Zero()), scene.dimension).capacity;
    add(rep, "capacity_scaling", anchor::cap_scaling, cap2, 2.0 * base.capacity, 0.01,
        std::abs(cap2 - 2.0 * base.capacity) <= 0.01 * 2.0 * base.capacity);
    const double diam = std::max(1.0, (scene.bounding_box.extent()).norm());
    const Vec3 shift(diam * 0.37, -diam * 0.21, diam * 0.11);
    const double capx = equilibrium(K.transformed(1.0, shift), scene.dimension).capacity;
    add(rep, "capacity_translation", anchor::cap_translation, capx, base.capacity, 1e-12,
        std::abs(capx - base.capacity) <= 1e-12 * base.capacity);
    const SubadditivityReport sub = capacity_subadditivity_check(
        {K, K.transformed(1.0, Vec3(10.0 * diam, 0.0, 0.0))}, scene.dimension);
    add(rep, "capacity_subadditivity", anchor::cap_subadditive, sub.union_capacity,
        sub.sum_of_parts, 0.02, sub.pass);
    double pmax = 0.0;
    const int n = 32;
    const Vec3 lo = scene.bounding_box.lo, e = scene.bounding_box.extent();
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const Vec3 x = lo + Vec3(e.x() * (i + 0.5) / n, e.y() * (j + 0.5) / n,
                                   e.z() * (k + 0.5) / n);
          pmax = std::max(pmax, potential(base.measure, x, scene.dimension));
        }
    add(rep, "potential_maximum_principle", anchor::max_principle, pmax, base.energy, 0.02,
        pmax <= 1.02 * base.energy);
  });

  guarded(rep, "lambda1_laws", "r^2 lambda1(rD) = lambda1(D)", [&] {
    const LawReport laws = law_checks(scene, 2.0, Vec3(0.1, 0.2, 0.3), opt.h, 1);
    for (const LawCheck& c : laws.checks) {
      LawCheck r = c;
      r.name = "lambda1_" + c.name;
      rep.records.push_back(r);
    }
  });

  double lambda_d = NAN;
  guarded(rep, "upper_bound", anchor::upper_bound, [&] {
    InradiusOptions io;
    io.h = 0.5 * opt.h;
    io.seed = opt.seed;
    const UpperBoundReport ub = verify_upper_bound(scene, 0.5 * opt.h, io);
    lambda_d = ub.lambda;
    add(rep, "upper_bound", anchor::upper_bound, ub.lambda, ub.bound, 0.05, ub.pass);
  });

  guarded(rep, "eigenvalue_continuity", anchor::continuity, [&] {
    ContinuityOptions co;
    co.center = opt.continuity_center;
    co.h = 0.5 * opt.h;
    co.seed = opt.seed;
    const ContinuityReport c = eigenvalue_continuity_experiment(opt.continuity_radii, co);
    add(rep, "eigenvalue_continuity", anchor::continuity, c.final_relative_gap, 0.05, 0.05, c.pass);
  });

  guarded(rep, "certificate", anchor::floor, [&] {
    CertificateConfig cfg;
    cfg.M = opt.M;
    cfg.shells = opt.shells;
    cfg.seed = opt.seed;
    const ObstacleSet set = select_obstacles(scene, cfg);
    const SubharmonicCertificate cert = build_phi(scene, set, cfg);
    const auto probes = certificate_probes(scene, cert, 0.5 * cfg.M);
    const FloorReport floor = laplacian_floor(cert, probes);
    add(rep, "certificate_floor", anchor::floor, floor.c, 0.0, 0.0,
        floor.c > 0.0 && floor.terms_nonnegative);
    add(rep, "certificate_fd_agreement", anchor::floor_identity, floor.max_relative_gap, 0.05,
        0.05, floor.agree);
    const LowerBounds lb = lambda1_lower_bounds(floor.c, cert.lower_bound_m, cert.upper_bound_M_phi);
    add(rep, "lower_bound_lee_dominates", anchor::hormander, lb.hormander, lb.lee, 0.0,
        lb.lee_dominates);
    if (std::isfinite(lambda_d))
      add(rep, "lower_bound_chain", anchor::lee, std::max(lb.lee, lb.hormander), lambda_d, 0.0,
          std::max(lb.lee, lb.hormander) <= lambda_d);
  });

  guarded(rep, "scalar_identities", anchor::twisted, [&] {
    const AxisBox region{Vec3::Constant(-1.0), Vec3::Constant(1.0)};
    const auto bumps = random_bumps(opt.bumps, region, 0.2, 0.8, opt.seed);
    const QuadraticField quad(Vec3(0.1, -0.2, 0.3), Vec3(3.0, 1.0, 2.0), 0.5);
    const IntegralReport tw = verify_twisted_inequality(quad, bumps, 32);
    add(rep, "twisted_inequality", anchor::twisted, tw.passed(), double(bumps.size()), 0.02,
        tw.pass());
    const SlabCosineField slab(1.5);
    const IntegralReport lee_slab = verify_lee_identity(slab, bumps, 32);
    const IntegralReport lee_quad = verify_lee_identity(quad, bumps, 32);
    add(rep, "lee_identity", anchor::lee_identity, lee_slab.passed() + lee_quad.passed(),
        2.0 * bumps.size(), 0.02, lee_slab.pass() && lee_quad.pass());
  });

  std::stable_sort(rep.records.begin(), rep.records.end(),
                   [](const LawCheck& a, const LawCheck& b) { return a.name < b.name; });
  return rep;
}

Table verify_table(const VerifyReport& report) {
  Table t;
  t.columns = {"name", "anchor", "lhs", "rhs", "tolerance", "pass"};
  for (const LawCheck& c : report.records)
    t.add_row({c.name, c.anchor, c.lhs, c.rhs, c.tolerance, c.pass});
  t.meta.emplace_back("pass", report.pass());
  return t;
}

}  // namespace capr
