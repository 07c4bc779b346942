// Command line front end: sweeps, calibration, analytical self-checks
// and stability estimates.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "fsl/harness.hpp"
#include "fsl/mandel.hpp"
#include "fsl/tuning.hpp"

namespace {

int cmd_run(const std::string& config_path, bool strict) {
  const fsl::ExperimentConfig cfg = fsl::load_config_file(config_path);
  const fsl::SweepResult res = fsl::run_sweep(cfg);
  fsl::emit_outputs(res, res.config.output_dir);

  int bad = 0;
  for (const auto& cell : res.cells)
    if (!cell.converged) ++bad;
  std::printf("case %s %s, %zu cells, %d non-converged\n",
              fsl::to_string(res.config.test_case).c_str(),
              fsl::to_string(res.config.disc).c_str(), res.cells.size(), bad);
  std::printf("K_dr = %.6e  beta = %.6e  C_omega = %.6e\n", res.K_dr, res.beta, res.C_omega);
  for (double kappa : res.config.kappa_list)
    std::printf("kappa %.0e: empirical argmin delta = %.3f\n", kappa,
                fsl::empirical_argmin_delta(res, kappa));
  std::printf("wrote sweep.csv, sweep.svg, run.json to %s\n", res.config.output_dir.c_str());
  return (strict && bad > 0) ? 2 : 0;
}

int cmd_calibrate(const std::string& case_name, const std::string& disc_name, double kappa,
                  bool strict) {
  const fsl::TestCase tc = fsl::test_case_from_string(case_name);
  const fsl::Disc disc = fsl::disc_from_string(disc_name);
  if (!(kappa > 0.0)) kappa = fsl::default_kappas(tc).front();
  const fsl::CalibrationResult res =
      fsl::calibrate_kdr(tc, disc, kappa, fsl::default_delta_grid());
  std::printf("case %s %s, kappa %.0e\n", case_name.c_str(), disc_name.c_str(), kappa);
  std::printf("c = %.2f  K_dr = %.6e\n", res.c, res.K_dr);
  std::printf("predicted delta = %.4f  measured argmin = %.4f  matched = %s\n",
              res.delta_star, res.empirical_argmin, res.matched ? "yes" : "no");
  return (strict && !res.matched) ? 2 : 0;
}

int cmd_mandel_check(bool strict) {
  const fsl::MandelParameters params;
  const fsl::MandelDerived d = fsl::mandel_derived(params);
  const fsl::RootSequence roots = fsl::mandel_roots(d.c_slope, 200);

  const double residual = roots.residual();
  const bool roots_ok = residual < 1e-10;
  std::printf("roots: n = %zu, max residual = %.3e (limit 1e-10) %s\n", roots.alpha.size(),
              residual, roots_ok ? "ok" : "FAIL");

  const fsl::MandelConsistency cons = fsl::mandel_consistency(params);
  std::printf(
      "constants: gap B = %.3e, gap nu_u = %.3e, gap c_f = %.3e, gap between c_f forms = "
      "%.3e %s\n",
      cons.gap_B, cons.gap_nu_u, cons.gap_c_f, cons.gap_c_f_forms, cons.ok ? "ok" : "FAIL");

  const double trunc = fsl::mandel_truncation_gap(params, roots);
  const bool trunc_ok = trunc < 1e-10;
  std::printf("truncation: halved-series gap = %.3e (limit 1e-10) %s\n", trunc,
              trunc_ok ? "ok" : "FAIL");

  double worst_edge = 0.0;
  for (int i = 1; i <= 20; ++i) {
    const double t = params.T * i / 20.0;
    worst_edge = std::max(worst_edge,
                          std::abs(fsl::mandel_pressure(params, roots, params.a, t)));
  }
  const bool edge_ok = worst_edge == 0.0;
  std::printf("drained edge: max |p(a,t)| = %.3e %s\n", worst_edge, edge_ok ? "ok" : "FAIL");

  const bool ok = roots_ok && cons.ok && trunc_ok && edge_ok;
  std::printf("mandel-check: %s\n", ok ? "all ok" : "FAILED");
  return (strict && !ok) ? 2 : 0;
}

int cmd_infsup(const std::string& disc_name, double h) {
  const fsl::Disc disc = fsl::disc_from_string(disc_name);
  if (!(h > 0.0) || h > 1.0) throw std::runtime_error("mesh size must lie in (0, 1]");
  const int n = std::max(1, static_cast<int>(std::lround(1.0 / h)));
  const fsl::Mesh mesh = fsl::build_rectangle_mesh(1.0, 1.0, n, n);
  const fsl::FunctionSpace u_space(
      mesh, disc == fsl::Disc::P2P1 ? fsl::SpaceKind::P2Vector2 : fsl::SpaceKind::P1Vector2);
  const fsl::FunctionSpace p_space(mesh, fsl::SpaceKind::P1Scalar);

  std::vector<int> fixed;
  for (int comp = 0; comp < 2; ++comp)
    for (const auto& [dof, v] : fsl::boundary_constraints(
             u_space, {fsl::tag::bottom, fsl::tag::right, fsl::tag::top, fsl::tag::left}, comp,
             nullptr, 0.0))
      fixed.push_back(dof);
  std::sort(fixed.begin(), fixed.end());
  fixed.erase(std::unique(fixed.begin(), fixed.end()), fixed.end());

  const fsl::InfSupEstimate est =
      fsl::estimate_inf_sup(u_space, p_space, 1.0, 0.0, fixed);
  std::printf("disc %s, n = %d (h = %.6g), clamped boundary\n", disc_name.c_str(), n, 1.0 / n);
  std::printf("gamma = %.6e  gamma^2 = %.6e  beta = %.6e\n", est.gamma, est.gamma_sq,
              est.beta_estimate);
  std::printf("constant mode deflated: %s, iterations %d\n", est.deflated ? "yes" : "no",
              est.iterations);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tuned splitting solver for coupled flow and mechanics"};
  app.require_subcommand(1);

  std::string config_path;
  bool run_strict = false;
  auto* run = app.add_subcommand("run", "run a sweep described by a config file");
  run->add_option("--config", config_path, "key = value config file")->required();
  run->add_flag("--strict", run_strict, "exit 2 when any cell fails to converge");

  std::string cal_case = "unit_square_setup1";
  std::string cal_disc = "p2p1";
  double cal_kappa = -1.0;
  bool cal_strict = false;
  auto* cal = app.add_subcommand("calibrate", "scan bulk modulus coefficients c in c*mu+lambda");
  cal->add_option("--case", cal_case, "catalog case name");
  cal->add_option("--disc", cal_disc, "p2p1 or p1p1");
  cal->add_option("--kappa", cal_kappa, "permeability (default: smallest catalog value)");
  cal->add_flag("--strict", cal_strict, "exit 2 when no candidate matches");

  bool mc_strict = false;
  auto* mc = app.add_subcommand("mandel-check", "analytical series self tests");
  mc->add_flag("--strict", mc_strict, "exit 2 on any failed check");

  std::string is_disc;
  double is_h = 0.0;
  auto* is = app.add_subcommand("infsup", "discrete stability constant on the unit square");
  is->set_help_flag("--help", "print help");  // frees --h for the mesh size
  is->add_option("--disc", is_disc, "p2p1 or p1p1")->required();
  is->add_option("--h", is_h, "target mesh size")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, run_strict);
    if (cal->parsed()) return cmd_calibrate(cal_case, cal_disc, cal_kappa, cal_strict);
    if (mc->parsed()) return cmd_mandel_check(mc_strict);
    if (is->parsed()) return cmd_infsup(is_disc, is_h);
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 0;
}
