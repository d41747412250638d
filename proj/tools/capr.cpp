#include "capr/capacity.hpp"
#include "capr/inradius.hpp"
#include "capr/report.hpp"
#include "capr/scene_io.hpp"
#include "capr/spectral.hpp"
#include "capr/subharmonic.hpp"
#include "capr/verify.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace capr;

namespace {

enum Exit { ok = 0, check_failed = 1, parse_failed = 2, numeric_failed = 3 };

struct Common {
  std::string scene_path;
  std::string format;
  std::string output;
  std::uint64_t seed = kDefaultSeed;
};

void write_error(const std::string& kind, const std::string& message, int code) {
  nlohmann::json e;
  e["error"] = {{"kind", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << e.dump() << "\n";
}

void write_output(const Common& c, const Table& t, Format fallback) {
  const Format f = c.format.empty() ? fallback : parse_format(c.format);
  const std::string text = emit(t, f);
  if (c.output.empty() || c.output == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(c.output, std::ios::binary);
  if (!out) throw Error(ErrorKind::precondition, "cannot write " + c.output);
  out << text;
}

int run_cap(const Common& c, int budget, double tol, const std::string& optimizer,
            const std::string& measure_out) {
  const Scene scene = load_scene(c.scene_path);
  EquilibriumOptions eo;
  eo.tol = tol;
  eo.optimizer = optimizer == "fw" ? Optimizer::frank_wolfe : Optimizer::projected_gradient;
  EquilibriumResult r;
  std::int64_t points = 0;
  try {
    const CompactSample K =
        sample_compact(*scene.root, budget, SampleOptions{c.seed, scene.bounding_box, {}});
    points = static_cast<std::int64_t>(K.size());
    r = equilibrium(K, scene.dimension, eo);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::empty_compact_set) throw;
    r.capacity = 0.0;
    r.energy = std::numeric_limits<double>::infinity();
    r.converged = true;
    r.empty_support = true;
  }
  Table t;
  t.columns = {"budget", "points", "capacity", "energy", "iterations", "converged"};
  t.add_row({std::int64_t{budget}, points, r.capacity, r.energy, std::int64_t{r.iterations},
             r.converged});
  if (!measure_out.empty() && !r.empty_support) {
    Table m;
    m.columns = {"x", "y", "z", "weight", "patch_radius"};
    const auto& pts = r.measure.support().points();
    for (std::size_t i = 0; i < pts.size(); ++i)
      m.add_row({pts[i].x(), pts[i].y(), pts[i].z(), r.measure.weights()[i],
                 r.measure.support().patch_radius()[i]});
    std::ofstream out(measure_out, std::ios::binary);
    if (!out) throw Error(ErrorKind::precondition, "cannot write " + measure_out);
    out << emit_csv(m);
  }
  write_output(c, t, Format::csv);
  return r.converged ? ok : numeric_failed;
}

int run_lambda1(const Common& c, double h, int refine) {
  const Scene scene = load_scene(c.scene_path);
  const SpectralEstimate e = dirichlet_lambda1(scene, h, refine);
  Table t;
  t.columns = {"h", "lambda", "extrapolated", "error_estimate"};
  for (const auto& [hh, lam] : e.lambda_by_h) t.add_row({hh, lam, e.extrapolated, e.error_estimate});
  t.meta.emplace_back("upper_bound_only", e.upper_bound_only);
  t.meta.emplace_back("monotone", e.monotone);
  if (e.upper_bound_only)
    std::cerr << "note: the scene is cut off by its bounding box; values bound lambda_1 from above\n";
  write_output(c, t, Format::csv);
  return ok;
}

int run_inradius(const Common& c, const std::vector<double>& ladder, double h, int budget,
                 double eps_polar) {
  const Scene scene = load_scene(c.scene_path);
  InradiusOptions io;
  io.eps_ladder = ladder;
  io.h = h;
  io.capacity_budget = budget;
  io.seed = c.seed;
  const double polar = eps_polar > 0.0 ? eps_polar : ladder.back();
  const InradiusReport r = inradius_report(scene, polar, io);
  Table t;
  t.columns = {"epsilon", "radius", "center_x", "center_y", "center_z", "cap_at_witness"};
  for (const RadiusPoint& p : r.rho)
    t.add_row({p.epsilon, p.radius, p.center.x(), p.center.y(), p.center.z(), p.cap_at_witness});
  t.meta.emplace_back("classical", r.classical);
  t.meta.emplace_back("frak_r", r.frak_r);
  t.meta.emplace_back("frak_r_eps", r.frak_r_eps);
  t.meta.emplace_back("unbounded_candidate", r.unbounded_candidate);
  t.meta.emplace_back("terminal_eps", ladder.back());
  write_output(c, t, Format::csv);
  return ok;
}

int run_certify(const Common& c, const CertificateConfig& cfg, double inradius_h) {
  const Scene scene = load_scene(c.scene_path);
  const ObstacleSet set = select_obstacles(scene, cfg);
  const SubharmonicCertificate cert = build_phi(scene, set, cfg);
  const double spacing = cfg.probe_spacing > 0.0 ? cfg.probe_spacing : 0.25 * cfg.M;
  const FloorReport floor = laplacian_floor(cert, certificate_probes(scene, cert, spacing));
  const LowerBounds lb = lambda1_lower_bounds(floor.c, cert.lower_bound_m, cert.upper_bound_M_phi);
  double classical = NAN;
  try {
    classical = classical_inradius(build_grid(scene, inradius_h > 0.0 ? inradius_h : cfg.M / 8.0));
  } catch (const Error&) {
  }
  Table t;
  t.flat = true;
  t.columns = {"delta", "c", "m", "M_phi", "tail", "lower_bound_hormander", "lower_bound_lee"};
  t.add_row({cert.delta(), floor.c, cert.lower_bound_m, cert.upper_bound_M_phi,
             cert.truncation_tail, lb.hormander, lb.lee});
  t.meta.emplace_back("M", cfg.M);
  t.meta.emplace_back("shells", std::int64_t{cfg.shells});
  t.meta.emplace_back("exponent_scale", cfg.exponent_scale);
  t.meta.emplace_back("obstacles", static_cast<std::int64_t>(set.obstacles.size()));
  t.meta.emplace_back("c_finite_difference", floor.c_fd);
  t.meta.emplace_back("fd_relative_gap", floor.max_relative_gap);
  t.meta.emplace_back("valid_probes", static_cast<std::int64_t>(floor.valid_probes));
  t.meta.emplace_back("classical_inradius", classical);
  const bool pass = floor.agree && floor.terms_nonnegative && lb.lee_dominates;
  t.meta.emplace_back("pass", pass);
  write_output(c, t, Format::json);
  return pass ? ok : check_failed;
}

int run_verify_cmd(const Common& c, const VerifyOptions& vo) {
  const Scene scene = load_scene(c.scene_path);
  const VerifyReport r = run_verify(scene, vo);
  write_output(c, verify_table(r), Format::text);
  return r.pass() ? ok : check_failed;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef _OPENMP
  if (const char* t = std::getenv("CAPR_THREADS")) {
    const int n = std::atoi(t);
    if (n > 0) omp_set_num_threads(n);
  }
#endif

  CLI::App app{"capr: Newtonian capacity, Dirichlet eigenvalue and inradius toolkit"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_config("--config", "", "Read options from a TOML/INI file; flags win");
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--format", common.format, "csv, json or text")
      ->check(CLI::IsMember({"csv", "json", "text"}));
  app.add_option("-o,--output", common.output, "Output file (default standard output)");
  app.add_option("--seed", common.seed, "Seed for all sampling");

  const auto scene_arg = [&](CLI::App* sub) {
    sub->add_option("scene", common.scene_path, "Scene JSON file")->required();
  };

  int budget = 2000;
  double tol = 1e-8;
  std::string optimizer = "pg";
  std::string measure_out;
  auto* cap = app.add_subcommand("cap", "Capacity of the scene's region");
  scene_arg(cap);
  cap->add_option("--budget", budget)->check(CLI::PositiveNumber);
  cap->add_option("--tol", tol)->check(CLI::PositiveNumber);
  cap->add_option("--optimizer", optimizer)->check(CLI::IsMember({"pg", "fw"}));
  cap->add_option("--measure-out", measure_out, "CSV of the equilibrium measure");

  double h = 1.0 / 24.0;
  int refine = 1;
  auto* lam = app.add_subcommand("lambda1", "Smallest Dirichlet eigenvalue");
  scene_arg(lam);
  lam->add_option("--h", h)->check(CLI::PositiveNumber);
  lam->add_option("--refine", refine)->check(CLI::PositiveNumber);

  std::vector<double> ladder{1e-1, 1e-2, 1e-3, 1e-4};
  double inr_h = 1.0 / 16.0;
  int inr_budget = 400;
  double eps_polar = 0.0;
  auto* inr = app.add_subcommand("inradius", "Classical, capacity and strict capacity inradii");
  scene_arg(inr);
  inr->add_option("--eps-ladder", ladder)->delimiter(',')->check(CLI::PositiveNumber);
  inr->add_option("--h", inr_h)->check(CLI::PositiveNumber);
  inr->add_option("--budget", inr_budget)->check(CLI::PositiveNumber);
  inr->add_option("--eps-polar", eps_polar, "Zero threshold for the capacity inradius");

  CertificateConfig cfg;
  std::string rule = "sampled";
  double cert_inradius_h = 0.0;
  auto* cert = app.add_subcommand("certify", "Build the bounded subharmonic certificate");
  scene_arg(cert);
  cert->add_option("--M", cfg.M)->required()->check(CLI::PositiveNumber);
  cert->add_option("--shells", cfg.shells)->check(CLI::Range(2, 64));
  cert->add_option("--exponent-scale", cfg.exponent_scale)->check(CLI::PositiveNumber);
  cert->add_option("--budget", cfg.obstacle_budget)->check(CLI::PositiveNumber);
  cert->add_option("--obstacles", rule)->check(CLI::IsMember({"sampled", "analytic"}));
  cert->add_option("--probe-spacing", cfg.probe_spacing)->check(CLI::PositiveNumber);
  cert->add_option("--inradius-h", cert_inradius_h)->check(CLI::PositiveNumber);

  VerifyOptions vo;
  auto* ver = app.add_subcommand("verify", "Run the law and bound checks");
  scene_arg(ver);
  ver->add_option("--h", vo.h)->check(CLI::PositiveNumber);
  ver->add_option("--budget", vo.budget)->check(CLI::PositiveNumber);
  ver->add_option("--M", vo.M)->check(CLI::PositiveNumber);
  ver->add_option("--shells", vo.shells)->check(CLI::Range(2, 64));
  ver->add_option("--bumps", vo.bumps)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    write_error("usage", e.what(), parse_failed);
    return parse_failed;
  }

  cfg.seed = common.seed;
  cfg.rule = rule == "analytic" ? ObstacleRule::analytic_balls : ObstacleRule::sampled;
  vo.seed = common.seed;

  try {
    if (*cap) return run_cap(common, budget, tol, optimizer, measure_out);
    if (*lam) return run_lambda1(common, h, refine);
    if (*inr) return run_inradius(common, ladder, inr_h, inr_budget, eps_polar);
    if (*cert) return run_certify(common, cfg, cert_inradius_h);
    if (*ver) return run_verify_cmd(common, vo);
  } catch (const Error& e) {
    const bool input = e.kind() == ErrorKind::parse || e.kind() == ErrorKind::precondition;
    const int code = input ? parse_failed : numeric_failed;
    write_error(to_string(e.kind()), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    write_error("internal", e.what(), numeric_failed);
    return numeric_failed;
  }
  return ok;
}
