// Acceptance gate for the splitting solver: one verdict line per
// criterion, nonzero exit when any of them fails.
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fsl/biot.hpp"
#include "fsl/fem.hpp"
#include "fsl/harness.hpp"
#include "fsl/mandel.hpp"
#include "fsl/mesh.hpp"
#include "fsl/tuning.hpp"

using namespace fsl;

namespace {

int failures = 0;

void verdict(int id, const std::string& label, bool ok, const std::string& note) {
  std::string suffix = note.empty() ? "" : " (" + note + ")";
  std::printf("[%s] criterion %d: %s%s\n", ok ? "PASS" : "FAIL", id, label.c_str(),
              suffix.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

template <typename Body>
void criterion(int id, const std::string& label, Body&& body) {
  try {
    std::string note;
    const bool ok = body(note);
    verdict(id, label, ok, note);
  } catch (const std::exception& err) {
    verdict(id, label, false, std::string("exception: ") + err.what());
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// ----- shared catalog runs (criteria 1 and 2) -------------------------------

struct CatalogRun {
  TestCase tc = TestCase::UnitSquareSetup1;
  double kappa = 0.0;
  bool converged = false;
  double rel_u = 0.0;       // final-state gap to the monolithic solve
  double rel_p = 0.0;
  bool monotone = false;    // pressure increments past the opening iterations
  double worst_rate = 0.0;  // NaN when a run finishes too quickly to measure
  double rate_bound = 0.0;
};

double rel_inf_gap(const Vector& a, const Vector& b) {
  return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

const std::vector<CatalogRun>& catalog_runs() {
  static std::vector<CatalogRun> runs = [] {
    std::vector<CatalogRun> out;
    for (TestCase tc : {TestCase::UnitSquareSetup1, TestCase::UnitSquareSetup2,
                        TestCase::LShape, TestCase::Mandel}) {
      const std::vector<double> kappas = default_kappas(tc);
      const CaseDefinition def0 = build_case(tc, kappas.front());
      const double K_dr = calibrated_coefficient(tc) * def0.mu + def0.lambda;
      FunctionSpace p_space0(def0.mesh, SpaceKind::P1Scalar);
      const double C_omega =
          estimate_poincare(p_space0, case_pressure_dirichlet(def0)).C_omega;

      for (double kappa : kappas) {
        CatalogRun run;
        run.tc = tc;
        run.kappa = kappa;

        CaseDefinition def = build_case(tc, kappa);
        const double alpha = def.problem.coeff.alpha;
        const double L = alpha * alpha / (1.5 * K_dr);

        BiotSolver solver(def.mesh, Disc::P2P1, def.problem);
        RunOptions mono_opt;
        mono_opt.method = Method::Monolithic;
        const RunResult mono = run_time_stepping(solver, mono_opt);

        RunOptions fs_opt;
        fs_opt.method = Method::FixedStress;
        fs_opt.fs.L = L;
        const RunResult fs = run_time_stepping(solver, fs_opt);

        run.converged = fs.report.all_converged;
        run.rel_u = rel_inf_gap(fs.trajectory.back().u, mono.trajectory.back().u);
        run.rel_p = rel_inf_gap(fs.trajectory.back().p, mono.trajectory.back().p);

        // contraction is only meaningful above the stopping floor: once
        // increments reach the run tolerance they wiggle at solver noise
        run.monotone = true;
        const auto& Mp = solver.pressure_mass();
        for (size_t s = 0; s < fs.report.steps.size(); ++s) {
          const Vector& p_step = fs.trajectory[s + 1].p;
          const double floor = 10.0 * 1e-12 * std::sqrt(p_step.dot(Mp * p_step));
          const auto& inc = fs.report.steps[s].inc_p_l2;
          for (size_t i = 2; i < inc.size(); ++i) {
            if (inc[i - 1] <= floor) continue;
            if (inc[i] > inc[i - 1] * (1.0 + 1e-9)) run.monotone = false;
          }
        }

        RateModel model;
        model.alpha = alpha;
        model.M = def.problem.coeff.M;
        model.tau = def.problem.tau;
        model.kappa = kappa;
        model.C_omega = C_omega;
        model.beta = K_dr;
        model.K_dr = K_dr;
        run.rate_bound = std::sqrt(theoretical_rate(model, 1.5, L)) + 0.05;
        run.worst_rate = fs.report.worst_observed_rate();
        out.push_back(run);
      }
    }
    return out;
  }();
  return runs;
}

// ----- manufactured square problem (criteria 4 and 9) -----------------------

constexpr double kMu = 41.667e9;
constexpr double kLambda = 27.778e9;
constexpr double kPref = 1e11;

double w(double x, double y) { return x * y * (1 - x) * (1 - y); }
double wx(double x, double y) { return (1 - 2 * x) * y * (1 - y); }
double wy(double x, double y) { return (1 - 2 * y) * x * (1 - x); }
double wxx(double, double y) { return -2 * y * (1 - y); }
double wyy(double x, double) { return -2 * x * (1 - x); }
double wxy(double x, double y) { return (1 - 2 * x) * (1 - 2 * y); }

BiotProblem square_problem(double kappa, double M) {
  BiotProblem prob;
  prob.coeff = {kMu, kLambda, 1.0, M, kappa, Vec2{0, 0}};
  prob.body_force = [](double x, double y, double t) {
    const double f1 = -kMu * t * (2 * wxx(x, y) + wyy(x, y) + wxy(x, y)) -
                      kLambda * t * (wxx(x, y) + wxy(x, y)) + kPref * t * wx(x, y);
    const double f2 = -kMu * t * (2 * wyy(x, y) + wxx(x, y) + wxy(x, y)) -
                      kLambda * t * (wyy(x, y) + wxy(x, y)) + kPref * t * wy(x, y);
    return Vec2{f1, f2};
  };
  prob.fluid_source = [kappa, M](double x, double y, double t) {
    return kPref * w(x, y) / M + (wx(x, y) + wy(x, y)) -
           kappa * kPref * t * (wxx(x, y) + wyy(x, y));
  };
  BoundaryCondition clamp;
  clamp.fix_ux = clamp.fix_uy = clamp.fix_p = true;
  for (int t : {tag::bottom, tag::right, tag::top, tag::left}) prob.bcs[t] = clamp;
  prob.tau = 0.1;
  prob.t0 = 0.0;
  prob.T = 0.1;
  prob.p_ref = kPref;
  return prob;
}

}  // namespace

int main() {
  criterion(1, "splitting fixed point matches the monolithic solve on all catalog cases",
            [](std::string& note) {
              double worst = 0.0;
              bool ok = true;
              for (const CatalogRun& run : catalog_runs()) {
                ok = ok && run.converged && run.rel_u <= 1e-8 && run.rel_p <= 1e-8;
                worst = std::max(worst, std::max(run.rel_u, run.rel_p));
              }
              note = "worst relative gap " + fmt(worst) + " over " +
                     std::to_string(catalog_runs().size()) + " runs, tol 1e-8";
              return ok;
            });

  criterion(2, "pressure increments contract within the predicted rate",
            [](std::string& note) {
              bool ok = true;
              double worst_margin = -1.0;
              for (const CatalogRun& run : catalog_runs()) {
                if (!run.monotone) ok = false;
                if (std::isnan(run.worst_rate)) continue;  // too few iterations
                if (run.worst_rate > run.rate_bound) ok = false;
                worst_margin = std::max(worst_margin, run.worst_rate - run.rate_bound);
              }
              note = "max rate minus bound " + fmt(worst_margin) +
                     ", increments monotone past iteration 2";
              return ok;
            });

  criterion(3, "tuned parameters stay inside their provable intervals",
            [](std::string& note) {
              std::mt19937 rng(2026);
              std::uniform_real_distribution<double> exp10(-6.0, 6.0);
              int bad = 0, clamped = 0;
              for (int i = 0; i < 1000; ++i) {
                RateModel m;
                m.alpha = std::pow(10.0, exp10(rng) / 2);
                m.M = std::pow(10.0, exp10(rng) + 6);
                m.tau = std::pow(10.0, exp10(rng) / 3);
                m.kappa = std::pow(10.0, exp10(rng) - 8);
                m.C_omega = std::pow(10.0, exp10(rng) / 4);
                m.beta = std::pow(10.0, exp10(rng) + 4);
                m.K_dr = std::pow(10.0, exp10(rng) + 4);
                const double delta = optimal_delta(m);
                const double L = optimal_L(m);
                const double lo = m.alpha * m.alpha / (2.0 * m.K_dr);
                const double hi = m.alpha * m.alpha / m.K_dr;
                if (!(delta >= 1.0 && delta <= 2.0 && L >= lo && L <= hi)) ++bad;
                if (delta == 2.0) ++clamped;
              }
              note = std::to_string(bad) + " of 1000 samples out of interval, " +
                     std::to_string(clamped) + " clamped";
              return bad == 0 && clamped > 0 && clamped < 1000;
            });

  criterion(4, "limit regimes keep convergence and pin the tuned delta",
            [](std::string& note) {
              Mesh mesh = build_rectangle_mesh(1, 1, 8, 8);
              BiotProblem prob = square_problem(1e-18, 1e16);
              BiotSolver solver(mesh, Disc::P2P1, prob);

              // physical stabilization: the measured coercivity constant of
              // the elastic form on this clamped mesh, not a fitted stand-in
              const double K_dr = verify_kdr(solver.u_space(), solver.p_space(), kMu, kLambda,
                                             solver.dirichlet_u_dofs(), kMu + kLambda)
                                      .m;

              RateModel stiff;
              stiff.alpha = 1.0;
              stiff.M = 1e16;
              stiff.tau = 0.1;
              stiff.kappa = 1e-18;
              stiff.C_omega =
                  estimate_poincare(solver.p_space(), solver.dirichlet_p_dofs()).C_omega;
              stiff.beta = K_dr;
              stiff.K_dr = K_dr;
              const double delta_stiff = optimal_delta(stiff);

              FixedStressConfig fs;
              fs.L = 1.0 / K_dr;
              fs.max_iter = 400;
              auto [state, report] = solver.fixed_stress_step(solver.initial_state(), 1, fs);

              RateModel loose = stiff;
              loose.M = 1e6;
              loose.kappa = 1e-6;
              const double delta_loose = optimal_delta(loose);

              note = "tuned delta " + fmt(delta_stiff) + ", converged " +
                     std::to_string(report.converged) + " in " +
                     std::to_string(report.iterations) +
                     " iterations vs budget 200, loose-regime delta " + fmt(delta_loose);
              return std::abs(delta_stiff - 1.0) <= 1e-3 && report.converged &&
                     report.iterations <= 200 && delta_loose == 2.0;
            });

  criterion(5, "best empirical delta is nondecreasing in permeability",
            [](std::string& note) {
              ExperimentConfig cfg;
              cfg.test_case = TestCase::UnitSquareSetup1;
              const SweepResult res = run_sweep(cfg);

              // iteration counts are integers, so the minimum is a plateau;
              // a leftward argmin move inside one flat plateau is a tie
              // artifact, not a trend reversal
              const auto row_min = [&](double kappa) {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& c : res.cells)
                  if (c.kappa == kappa && c.converged) best = std::min(best, c.iterations);
                return best;
              };
              const auto flat_between = [&](double kappa, double lo, double hi) {
                const double best = row_min(kappa);
                for (const auto& c : res.cells) {
                  if (c.kappa != kappa || c.delta < lo - 1e-12 || c.delta > hi + 1e-12)
                    continue;
                  if (!c.converged || c.iterations != best) return false;
                }
                return true;
              };

              bool ok = true;
              std::string seen;
              double prev = 0.0;
              for (double kappa : res.config.kappa_list) {
                const double arg = empirical_argmin_delta(res, kappa);
                seen += (seen.empty() ? "" : " ") + fmt(arg);
                if (arg < prev - 1e-12 && !flat_between(kappa, arg, prev)) ok = false;
                prev = std::max(prev, arg);
              }
              note = "argmins over rising permeability: " + seen;
              return ok;
            });

  criterion(6, "inf-sup estimate separates the stable and unstable pairs",
            [](std::string& note) {
              const auto gamma_of = [](int n, Disc disc) {
                Mesh mesh = build_rectangle_mesh(1, 1, n, n);
                FunctionSpace u(mesh, disc == Disc::P2P1 ? SpaceKind::P2Vector2
                                                         : SpaceKind::P1Vector2);
                FunctionSpace p(mesh, SpaceKind::P1Scalar);
                std::vector<std::pair<int, double>> pairs;
                const std::vector<int> all = {tag::bottom, tag::right, tag::top, tag::left};
                for (int comp : {0, 1}) {
                  auto part = boundary_constraints(u, all, comp, nullptr, 0.0);
                  pairs.insert(pairs.end(), part.begin(), part.end());
                }
                return estimate_inf_sup(u, p, 41.667e9, 27.778e9,
                                        DirichletSet::from_pairs(pairs).dofs())
                    .gamma;
              };
              const double stable = gamma_of(4, Disc::P2P1) / gamma_of(8, Disc::P2P1);
              const double unstable = gamma_of(4, Disc::P1P1) / gamma_of(8, Disc::P1P1);
              note = "coarse/fine gamma ratio " + fmt(stable) + " stable vs " + fmt(unstable) +
                     " unstable, band [0.8, 1.25]";
              const bool stable_ok = stable >= 0.8 && stable <= 1.25;
              const bool unstable_ok = unstable < 0.8 || unstable > 1.25;
              return stable_ok && unstable_ok;
            });

  criterion(7, "bulk-modulus calibration recovers the published coefficients",
            [](std::string& note) {
              struct Expect {
                TestCase tc;
                double c;
              };
              const std::vector<Expect> expected = {
                  {TestCase::UnitSquareSetup1, 1.6},
                  {TestCase::UnitSquareSetup2, 1.1},
                  {TestCase::LShape, 1.4},
                  {TestCase::Mandel, 1.35},
              };
              bool ok = true;
              std::string seen;
              for (const Expect& e : expected) {
                const double kappa_min = default_kappas(e.tc).front();
                const CalibrationResult res =
                    calibrate_kdr(e.tc, Disc::P2P1, kappa_min, {});
                seen += (seen.empty() ? "" : " ") + fmt(res.c);
                if (std::abs(res.c - e.c) > 0.1) ok = false;
              }
              note = "calibrated coefficients " + seen + " vs 1.6 1.1 1.4 1.35, tol 0.1";
              return ok;
            });

  criterion(8, "consolidation series is self-consistent and matched by the solver",
            [](std::string& note) {
              MandelParameters params;
              const MandelDerived derived = mandel_derived(params);
              RootSequence r200 = mandel_roots(derived.c_slope, 200);
              RootSequence r400 = mandel_roots(derived.c_slope, 400);
              bool ok = static_cast<double>(r200.residual()) < 1e-10;

              std::mt19937 rng(7);
              std::uniform_real_distribution<double> time(0.0, 100.0);
              for (int i = 0; i < 100; ++i)
                if (mandel_pressure(params, r200, params.a, time(rng)) != 0.0) ok = false;

              double trunc_gap = 0.0;
              for (double t : {10.0, 50.0}) {
                double diff = 0.0, scale = 0.0;
                for (int i = 0; i <= 20; ++i) {
                  const double x = params.a * i / 20.0;
                  const double v2 = mandel_pressure(params, r400, x, t);
                  diff = std::max(diff,
                                  std::abs(mandel_pressure(params, r200, x, t) - v2));
                  scale = std::max(scale, std::abs(v2));
                }
                trunc_gap = std::max(trunc_gap, diff / scale);
              }
              if (trunc_gap > 1e-10) ok = false;

              CaseDefinition def = build_case(TestCase::Mandel, params.kappa);
              BiotSolver solver(def.mesh, Disc::P2P1, def.problem);
              RunOptions opt;
              opt.method = Method::Monolithic;
              const RunResult run = run_time_stepping(solver, opt);
              const DiscreteState& last = run.trajectory.back();

              double num = 0.0, den = 0.0;
              const FunctionSpace& p_space = solver.p_space();
              for (int v = 0; v < static_cast<int>(def.mesh.vertices.size()); ++v) {
                const Vec2 pos = def.mesh.vertices[v];
                if (std::abs(pos.y - params.b / 2) > 1e-9) continue;
                const double exact = mandel_pressure(params, r200, pos.x, last.time);
                const double approx = last.p[p_space.dof(v, 0)];
                num += (approx - exact) * (approx - exact);
                den += exact * exact;
              }
              const double midline = std::sqrt(num / den);
              if (midline > 0.10) ok = false;

              note = "truncation gap " + fmt(trunc_gap) + ", midline pressure error " +
                     fmt(midline) + " vs 0.10";
              return ok;
            });

  criterion(9, "iterate displacement energy stays below the pressure error bound",
            [](std::string& note) {
              Mesh mesh = build_rectangle_mesh(1, 1, 8, 8);
              BiotProblem prob = square_problem(1e-12, 1e11);
              BiotSolver solver(mesh, Disc::P2P1, prob);
              DiscreteState init = solver.initial_state();
              DiscreteState mono = solver.monolithic_step(init, 1);

              FixedStressConfig fs;
              fs.L = 1.0 / (1.5 * (1.6 * kMu + kLambda));
              fs.record_iterates = true;
              auto [state, report] = solver.fixed_stress_step(init, 1, fs);
              if (!report.converged || report.iterates.empty()) {
                note = "splitting run did not converge";
                return false;
              }

              const auto& A = solver.elasticity();
              const auto& Mp = solver.pressure_mass();
              const double factor = 1.0 / (kMu + kLambda);  // alpha = 1
              bool ok = true;
              double worst = 0.0;
              for (const DiscreteState& it : report.iterates) {
                const Vector eu = it.u - mono.u;
                const Vector ep = it.p - mono.p;
                const double lhs = eu.dot(A * eu);
                const double rhs = factor * ep.dot(Mp * ep);
                if (lhs > rhs * (1.0 + 1e-6) + 1e-30) ok = false;
                if (rhs > 0.0) worst = std::max(worst, lhs / rhs);
              }
              note = "largest energy ratio " + fmt(worst) + " vs 1 over " +
                     std::to_string(report.iterates.size()) + " iterates";
              return ok;
            });

  criterion(10, "randomized sweeps with one seed emit byte-identical tables",
            [](std::string& note) {
              ExperimentConfig cfg;
              cfg.test_case = TestCase::UnitSquareSetup1;
              cfg.kappa_list = {1e-12};
              cfg.delta_grid = {1.0, 1.25, 1.5, 1.75, 2.0};
              cfg.random_mode = RandomMode::M1;
              cfg.num_realizations = 20;
              cfg.seed = 7;
              const auto csv_of = [](const SweepResult& res) {
                std::ostringstream out;
                write_sweep_csv(res, out);
                return out.str();
              };
              const std::string first = csv_of(run_sweep(cfg));
              const std::string second = csv_of(run_sweep(cfg));
              note = "two 20-realization sweeps, " +
                     std::to_string(first.size()) + " bytes each";
              return !first.empty() && first == second;
            });

  if (failures > 0) {
    std::printf("acceptance: %d of 10 criteria failed\n", failures);
    return 1;
  }
  std::printf("acceptance: all 10 criteria passed\n");
  return 0;
}
