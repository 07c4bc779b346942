#include "fsl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace fsl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Unit-square material of the manufactured cases.
constexpr double kMuSquare = 41.667e9;
constexpr double kLambdaSquare = 27.778e9;
constexpr double kMSquare = 1e11;
constexpr double kPressureScale = 1e11;

// Bubble profile w = x(1-x)y(1-y) and its derivatives.
double pw(double x, double y) { return x * (1.0 - x) * y * (1.0 - y); }
double pwx(double x, double y) { return (1.0 - 2.0 * x) * y * (1.0 - y); }
double pwy(double x, double y) { return x * (1.0 - x) * (1.0 - 2.0 * y); }
double pwxx(double, double y) { return -2.0 * y * (1.0 - y); }
double pwyy(double x, double) { return -2.0 * x * (1.0 - x); }
double pwxy(double x, double y) { return (1.0 - 2.0 * x) * (1.0 - 2.0 * y); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_double(const std::string& s, int lineno) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config line " + std::to_string(lineno) + ": bad number '" + s +
                             "'");
  }
}

std::vector<double> parse_double_list(const std::string& s, int lineno) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(item, lineno));
  }
  return out;
}

std::string fmt17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17e", v);
  return buf;
}

/// One randomized realization; empty members keep the baseline.
struct Scenario {
  std::optional<Vector> start_u, start_p;  // splitting start iterate
  std::optional<Vector> init_u, init_p;    // time-stepping initial data
  std::map<int, std::array<std::optional<double>, 3>> bc_values;  // tag -> (ux, uy, p)
  std::optional<Vec2> force_const;
  std::optional<double> source_const;
  std::optional<std::map<int, std::pair<bool, bool>>> bc_kinds;  // tag -> (u fixed, p fixed)
};

std::vector<int> sorted_boundary_tags(const Mesh& mesh) {
  std::set<int> tags;
  for (const auto& be : mesh.boundary_edges) tags.insert(be.tag);
  return {tags.begin(), tags.end()};
}

Scenario draw_scenario(RandomMode mode, std::uint64_t seed, const CaseDefinition& def,
                       int nu, int np) {
  Scenario sc;
  if (mode == RandomMode::None) return sc;
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double p_ref = def.problem.p_ref;
  switch (mode) {
    case RandomMode::M1: {
      Vector u(nu), p(np);
      for (int i = 0; i < nu; ++i) u[i] = unit(eng);
      for (int i = 0; i < np; ++i) p[i] = p_ref * unit(eng);
      sc.start_u = std::move(u);
      sc.start_p = std::move(p);
      break;
    }
    case RandomMode::M2: {
      Vector u(nu), p(np);
      for (int i = 0; i < nu; ++i) u[i] = unit(eng);
      for (int i = 0; i < np; ++i) p[i] = p_ref * unit(eng);
      sc.init_u = std::move(u);
      sc.init_p = std::move(p);
      break;
    }
    case RandomMode::M3: {
      for (const auto& [tg, bc] : def.problem.bcs) {
        std::array<std::optional<double>, 3> vals;
        if (bc.fix_ux) vals[0] = unit(eng);
        if (bc.fix_uy) vals[1] = unit(eng);
        if (bc.fix_p) vals[2] = p_ref * unit(eng);
        sc.bc_values[tg] = vals;
      }
      break;
    }
    case RandomMode::M4: {
      sc.force_const = Vec2{p_ref * unit(eng), p_ref * unit(eng)};
      sc.source_const = unit(eng);
      break;
    }
    case RandomMode::M5: {
      const std::vector<int> tags = sorted_boundary_tags(def.mesh);
      std::uniform_int_distribution<int> coin(0, 1);
      for (int attempt = 0; attempt < 100; ++attempt) {
        std::map<int, std::pair<bool, bool>> kinds;
        bool u_constrained = false;
        for (int tg : tags) {
          const bool u_dir = coin(eng) == 1;
          const bool p_dir = coin(eng) == 1;
          kinds[tg] = {u_dir, p_dir};
          u_constrained = u_constrained || u_dir;
        }
        if (u_constrained) {
          sc.bc_kinds = std::move(kinds);
          break;
        }
      }
      if (!sc.bc_kinds)
        throw std::runtime_error("boundary draw left the displacement unconstrained");
      break;
    }
    case RandomMode::None:
      break;
  }
  return sc;
}

BiotProblem apply_scenario(const BiotProblem& base, const Scenario& sc) {
  BiotProblem prob = base;
  if (sc.bc_kinds) {
    prob.bcs.clear();
    for (const auto& [tg, kinds] : *sc.bc_kinds) {
      if (!kinds.first && !kinds.second) continue;
      BoundaryCondition bc;
      bc.fix_ux = bc.fix_uy = kinds.first;
      bc.fix_p = kinds.second;
      prob.bcs[tg] = bc;  // homogeneous data on both parts
    }
  }
  for (const auto& [tg, vals] : sc.bc_values) {
    auto it = prob.bcs.find(tg);
    if (it == prob.bcs.end()) continue;
    if (vals[0]) {
      const double v = *vals[0];
      it->second.ux = [v](double, double, double) { return v; };
    }
    if (vals[1]) {
      const double v = *vals[1];
      it->second.uy = [v](double, double, double) { return v; };
    }
    if (vals[2]) {
      const double v = *vals[2];
      it->second.p = [v](double, double, double) { return v; };
    }
  }
  if (sc.force_const) {
    const Vec2 v = *sc.force_const;
    prob.body_force = [v](double, double, double) { return v; };
  }
  if (sc.source_const) {
    const double v = *sc.source_const;
    prob.fluid_source = [v](double, double, double) { return v; };
  }
  return prob;
}

struct CellOut {
  double iterations = 0.0;
  bool converged = false;
  double rate = kNaN;
};

CellOut run_single(TestCase tc, Disc disc, const Scenario& sc, double kappa, double L,
                   double eps_u, double eps_p, int max_iter) {
  CellOut out;
  try {
    CaseDefinition def = build_case(tc, kappa);
    const BiotProblem prob = apply_scenario(def.problem, sc);
    BiotSolver solver(def.mesh, disc, prob);
    RunOptions opt;
    opt.method = Method::FixedStress;
    opt.fs.L = L;
    opt.fs.eps_u = eps_u;
    opt.fs.eps_p = eps_p;
    opt.fs.max_iter = max_iter;
    if (sc.init_u) {
      DiscreteState s;
      s.u = *sc.init_u;
      s.p = *sc.init_p;
      s.time = prob.t0;
      opt.initial_state = std::move(s);
    }
    if (sc.start_u) {
      DiscreteState s;
      s.u = *sc.start_u;
      s.p = *sc.start_p;
      s.time = prob.t0;
      opt.start_iterate = std::move(s);
    }
    const RunResult rr = run_time_stepping(solver, opt);
    out.iterations = rr.report.total_iterations;
    out.converged = rr.report.all_converged;
    out.rate = rr.report.worst_observed_rate();
  } catch (const std::exception&) {
    out.iterations = max_iter;
    out.converged = false;
    out.rate = kNaN;
  }
  return out;
}

void run_pool(int n_jobs, const std::function<void(int)>& work) {
  int threads = std::min(resolve_thread_count(), n_jobs);
  if (threads <= 1) {
    for (int i = 0; i < n_jobs; ++i) work(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n_jobs; i = next.fetch_add(1)) work(i);
    });
  for (auto& th : pool) th.join();
}

double kdr_value(KdrExpression expr, const CaseDefinition& def) {
  switch (expr) {
    case KdrExpression::Calibrated:
      return def.calibrated_c * def.mu + def.lambda;
    case KdrExpression::MuPlusLambda:
      return def.mu + def.lambda;
    case KdrExpression::TwoMuOverDPlusLambda:
      return 2.0 * def.mu / 2.0 + def.lambda;  // d = 2
  }
  throw std::invalid_argument("unknown bulk modulus expression");
}

SpaceKind u_space_kind(Disc disc) {
  return disc == Disc::P2P1 ? SpaceKind::P2Vector2 : SpaceKind::P1Vector2;
}

/// Piecewise-linear read of a sampled curve, clamped at the ends.
double interp_series(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  for (size_t i = 1; i < xs.size(); ++i) {
    if (x <= xs[i]) {
      const double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
      return ys[i - 1] + t * (ys[i] - ys[i - 1]);
    }
  }
  return ys.back();
}

}  // namespace

std::string to_string(TestCase v) {
  switch (v) {
    case TestCase::UnitSquareSetup1: return "unit_square_setup1";
    case TestCase::UnitSquareSetup2: return "unit_square_setup2";
    case TestCase::LShape: return "l_shape";
    case TestCase::Mandel: return "mandel";
  }
  return "?";
}

std::string to_string(Disc v) { return v == Disc::P2P1 ? "p2p1" : "p1p1"; }

std::string to_string(KdrExpression v) {
  switch (v) {
    case KdrExpression::Calibrated: return "calibrated";
    case KdrExpression::MuPlusLambda: return "mu_plus_lambda";
    case KdrExpression::TwoMuOverDPlusLambda: return "two_mu_over_d_plus_lambda";
  }
  return "?";
}

std::string to_string(BetaMode v) {
  return v == BetaMode::EqualKdr ? "k_dr" : "inf_sup";
}

std::string to_string(RandomMode v) {
  switch (v) {
    case RandomMode::None: return "none";
    case RandomMode::M1: return "m1";
    case RandomMode::M2: return "m2";
    case RandomMode::M3: return "m3";
    case RandomMode::M4: return "m4";
    case RandomMode::M5: return "m5";
  }
  return "?";
}

TestCase test_case_from_string(const std::string& s) {
  if (s == "unit_square_setup1") return TestCase::UnitSquareSetup1;
  if (s == "unit_square_setup2") return TestCase::UnitSquareSetup2;
  if (s == "l_shape") return TestCase::LShape;
  if (s == "mandel") return TestCase::Mandel;
  throw std::invalid_argument("unknown test case '" + s + "'");
}

Disc disc_from_string(const std::string& s) {
  if (s == "p2p1") return Disc::P2P1;
  if (s == "p1p1") return Disc::P1P1;
  throw std::invalid_argument("unknown discretization '" + s + "'");
}

KdrExpression kdr_expression_from_string(const std::string& s) {
  if (s == "calibrated") return KdrExpression::Calibrated;
  if (s == "mu_plus_lambda") return KdrExpression::MuPlusLambda;
  if (s == "two_mu_over_d_plus_lambda") return KdrExpression::TwoMuOverDPlusLambda;
  throw std::invalid_argument("unknown bulk modulus expression '" + s + "'");
}

BetaMode beta_mode_from_string(const std::string& s) {
  if (s == "k_dr") return BetaMode::EqualKdr;
  if (s == "inf_sup") return BetaMode::FromInfSupEstimate;
  throw std::invalid_argument("unknown beta mode '" + s + "'");
}

RandomMode random_mode_from_string(const std::string& s) {
  if (s == "none") return RandomMode::None;
  if (s == "m1") return RandomMode::M1;
  if (s == "m2") return RandomMode::M2;
  if (s == "m3") return RandomMode::M3;
  if (s == "m4") return RandomMode::M4;
  if (s == "m5") return RandomMode::M5;
  throw std::invalid_argument("unknown random mode '" + s + "'");
}

std::uint64_t child_seed(std::uint64_t seed, std::uint64_t realization) {
  return splitmix64(seed + splitmix64(realization + 1));
}

int resolve_thread_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("FSL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && v < n) n = static_cast<int>(v);
  }
  return n;
}

std::vector<double> default_delta_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 30; ++i) grid.push_back(1.0 + 0.05 * i);
  return grid;
}

std::vector<double> default_kappas(TestCase tc) {
  if (tc == TestCase::Mandel) return {1e-14, 1e-13, 1e-12, 1e-11, 1e-10};
  return {1e-15, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10};
}

double calibrated_coefficient(TestCase tc) {
  switch (tc) {
    case TestCase::UnitSquareSetup1: return 1.6;
    case TestCase::UnitSquareSetup2: return 1.1;
    case TestCase::LShape: return 1.4;
    case TestCase::Mandel: return 1.35;
  }
  return 1.0;
}

CaseDefinition build_case(TestCase tc, double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("permeability must be positive");
  CaseDefinition def;
  def.calibrated_c = calibrated_coefficient(tc);

  if (tc == TestCase::Mandel) {
    MandelParameters ps;
    ps.kappa = kappa;
    def.mesh = build_rectangle_mesh(ps.a, ps.b, 20, 20);
    def.problem = build_mandel_problem(ps);
    def.mu = ps.mu;
    def.lambda = ps.lambda;
    return def;
  }

  const double mu = kMuSquare, la = kLambdaSquare;
  def.mu = mu;
  def.lambda = la;

  BiotProblem prob;
  prob.coeff.mu = mu;
  prob.coeff.lambda = la;
  prob.coeff.alpha = 1.0;
  prob.coeff.M = kMSquare;
  prob.coeff.kappa = kappa;
  prob.tau = 0.1;
  prob.t0 = 0.0;
  prob.T = 0.1;
  prob.p_ref = kPressureScale;
  prob.body_force = [mu, la](double x, double y, double t) {
    const double f1 = -mu * t * (2.0 * pwxx(x, y) + pwyy(x, y) + pwxy(x, y)) -
                      la * t * (pwxx(x, y) + pwxy(x, y)) + kPressureScale * t * pwx(x, y);
    const double f2 = -mu * t * (pwxx(x, y) + 2.0 * pwyy(x, y) + pwxy(x, y)) -
                      la * t * (pwyy(x, y) + pwxy(x, y)) + kPressureScale * t * pwy(x, y);
    return Vec2{f1, f2};
  };
  prob.fluid_source = [kappa](double x, double y, double t) {
    return kPressureScale * pw(x, y) / kMSquare + (pwx(x, y) + pwy(x, y)) -
           kappa * kPressureScale * t * (pwxx(x, y) + pwyy(x, y));
  };

  BoundaryCondition clamp_all;
  clamp_all.fix_ux = clamp_all.fix_uy = clamp_all.fix_p = true;
  BoundaryCondition pressure_only;
  pressure_only.fix_p = true;

  switch (tc) {
    case TestCase::UnitSquareSetup1:
      def.mesh = build_rectangle_mesh(1.0, 1.0, 8, 8);
      for (int tg : {tag::bottom, tag::right, tag::top, tag::left}) prob.bcs[tg] = clamp_all;
      break;
    case TestCase::UnitSquareSetup2:
      def.mesh = build_rectangle_mesh(1.0, 1.0, 8, 8);
      for (int tg : {tag::bottom, tag::right, tag::left}) prob.bcs[tg] = clamp_all;
      prob.bcs[tag::top] = pressure_only;  // free surface for the solid
      break;
    case TestCase::LShape:
      def.mesh = build_l_shape_mesh(8);
      for (int tg : {tag::gamma1, tag::gamma2, tag::gamma3, tag::gamma4, tag::gamma5})
        prob.bcs[tg] = clamp_all;
      prob.bcs[tag::gamma6] = pressure_only;
      break;
    default:
      break;
  }
  def.problem = std::move(prob);
  return def;
}

std::vector<int> case_pressure_dirichlet(const CaseDefinition& def) {
  FunctionSpace p_space(def.mesh, SpaceKind::P1Scalar);
  std::set<int> dofs;
  for (const auto& [tg, bc] : def.problem.bcs) {
    if (!bc.fix_p) continue;
    for (const auto& [d, v] : boundary_constraints(p_space, {tg}, 0, nullptr, 0.0))
      dofs.insert(d);
  }
  return {dofs.begin(), dofs.end()};
}

std::vector<int> case_displacement_dirichlet(const CaseDefinition& def, Disc disc) {
  FunctionSpace u_space(def.mesh, u_space_kind(disc));
  std::set<int> dofs;
  for (const auto& [tg, bc] : def.problem.bcs) {
    if (bc.fix_ux)
      for (const auto& [d, v] : boundary_constraints(u_space, {tg}, 0, nullptr, 0.0))
        dofs.insert(d);
    if (bc.fix_uy)
      for (const auto& [d, v] : boundary_constraints(u_space, {tg}, 1, nullptr, 0.0))
        dofs.insert(d);
  }
  return {dofs.begin(), dofs.end()};
}

ExperimentConfig parse_config_text(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  double dmin = kNaN, dmax = kNaN, dstep = kNaN;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "test_case") cfg.test_case = test_case_from_string(value);
      else if (key == "disc") cfg.disc = disc_from_string(value);
      else if (key == "kappa_list") cfg.kappa_list = parse_double_list(value, lineno);
      else if (key == "delta_grid") cfg.delta_grid = parse_double_list(value, lineno);
      else if (key == "delta_min") dmin = parse_double(value, lineno);
      else if (key == "delta_max") dmax = parse_double(value, lineno);
      else if (key == "delta_step") dstep = parse_double(value, lineno);
      else if (key == "k_dr") cfg.k_dr_expression = kdr_expression_from_string(value);
      else if (key == "beta") cfg.beta_mode = beta_mode_from_string(value);
      else if (key == "random_mode") cfg.random_mode = random_mode_from_string(value);
      else if (key == "num_realizations") cfg.num_realizations = std::stoi(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "eps_u") cfg.eps_u = parse_double(value, lineno);
      else if (key == "eps_p") cfg.eps_p = parse_double(value, lineno);
      else if (key == "max_iter") cfg.max_iter = std::stoi(value);
      else if (key == "output_dir") cfg.output_dir = value;
      else
        throw std::runtime_error("config line " + std::to_string(lineno) + ": unknown key '" +
                                 key + "'");
    } catch (const std::invalid_argument& err) {
      throw std::runtime_error("config line " + std::to_string(lineno) + ": " + err.what());
    }
  }
  if (cfg.delta_grid.empty() && !std::isnan(dmin)) {
    if (std::isnan(dmax) || std::isnan(dstep) || !(dstep > 0.0) || dmax < dmin)
      throw std::runtime_error("config: delta_min/delta_max/delta_step must form a valid range");
    const int n = static_cast<int>(std::floor((dmax - dmin) / dstep + 0.5));
    for (int i = 0; i <= n; ++i) cfg.delta_grid.push_back(dmin + i * dstep);
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  return parse_config_text(in);
}

SweepResult run_sweep(const ExperimentConfig& config_in) {
  ExperimentConfig cfg = config_in;
  if (cfg.kappa_list.empty()) cfg.kappa_list = default_kappas(cfg.test_case);
  if (cfg.delta_grid.empty()) cfg.delta_grid = default_delta_grid();
  for (double k : cfg.kappa_list)
    if (!(k > 0.0)) throw std::invalid_argument("permeabilities must be positive");
  if (!std::is_sorted(cfg.delta_grid.begin(), cfg.delta_grid.end()))
    throw std::invalid_argument("delta grid must be sorted");
  if (cfg.num_realizations < 1) throw std::invalid_argument("need at least one realization");
  if (!(cfg.eps_u > 0.0) || !(cfg.eps_p > 0.0))
    throw std::invalid_argument("tolerances must be positive");
  if (cfg.max_iter < 1) throw std::invalid_argument("max_iter must be positive");
  if (cfg.random_mode == RandomMode::None) cfg.num_realizations = 1;

  const CaseDefinition def0 = build_case(cfg.test_case, cfg.kappa_list.front());
  SweepResult res;
  res.mu = def0.mu;
  res.lambda = def0.lambda;
  res.K_dr = kdr_value(cfg.k_dr_expression, def0);

  FunctionSpace p_space(def0.mesh, SpaceKind::P1Scalar);
  FunctionSpace u_space(def0.mesh, u_space_kind(cfg.disc));
  res.C_omega = estimate_poincare(p_space, case_pressure_dirichlet(def0)).C_omega;
  if (cfg.beta_mode == BetaMode::FromInfSupEstimate) {
    const InfSupEstimate est = estimate_inf_sup(
        u_space, p_space, def0.mu, def0.lambda, case_displacement_dirichlet(def0, cfg.disc));
    res.beta = est.beta_estimate;
    res.gamma = est.gamma;
  } else {
    res.beta = res.K_dr;
    res.gamma = kNaN;
  }

  const double alpha = def0.problem.coeff.alpha;
  std::vector<double> delta_star(cfg.kappa_list.size());
  for (size_t ik = 0; ik < cfg.kappa_list.size(); ++ik) {
    RateModel model;
    model.alpha = alpha;
    model.M = def0.problem.coeff.M;
    model.tau = def0.problem.tau;
    model.kappa = cfg.kappa_list[ik];
    model.C_omega = res.C_omega;
    model.beta = res.beta;
    model.K_dr = res.K_dr;
    delta_star[ik] = optimal_delta(model);
  }

  std::vector<Scenario> scenarios(cfg.num_realizations);
  for (int r = 0; r < cfg.num_realizations; ++r)
    scenarios[r] = draw_scenario(cfg.random_mode, child_seed(cfg.seed, r), def0,
                                 u_space.num_dofs(), p_space.num_dofs());

  const int nk = static_cast<int>(cfg.kappa_list.size());
  const int nd = static_cast<int>(cfg.delta_grid.size());
  const int nr = cfg.num_realizations;
  const int n_jobs = nk * nd * nr;
  std::vector<CellOut> outs(n_jobs);
  run_pool(n_jobs, [&](int i) {
    const int r = i % nr;
    const int id = (i / nr) % nd;
    const int ik = i / (nr * nd);
    const double L = alpha * alpha / (cfg.delta_grid[id] * res.K_dr);
    outs[i] = run_single(cfg.test_case, cfg.disc, scenarios[r], cfg.kappa_list[ik], L,
                         cfg.eps_u, cfg.eps_p, cfg.max_iter);
  });

  res.config = cfg;
  res.cells.reserve(static_cast<size_t>(nk) * nd);
  for (int ik = 0; ik < nk; ++ik) {
    for (int id = 0; id < nd; ++id) {
      SweepCell cell;
      cell.kappa = cfg.kappa_list[ik];
      cell.delta = cfg.delta_grid[id];
      cell.L = alpha * alpha / (cell.delta * res.K_dr);
      cell.delta_star = delta_star[ik];
      cell.converged = true;
      double sum = 0.0, rate_sum = 0.0;
      int rate_count = 0;
      for (int r = 0; r < nr; ++r) {
        const CellOut& o = outs[(ik * nd + id) * nr + r];
        sum += o.iterations;
        cell.converged = cell.converged && o.converged;
        if (!std::isnan(o.rate)) {
          rate_sum += o.rate;
          ++rate_count;
        }
      }
      cell.iterations = sum / nr;
      cell.observed_rate = rate_count > 0 ? rate_sum / rate_count : kNaN;
      res.cells.push_back(cell);
    }
  }
  return res;
}

double empirical_argmin_delta(const SweepResult& result, double kappa) {
  const SweepCell* best = nullptr;
  for (const auto& cell : result.cells) {
    if (cell.kappa != kappa) continue;
    if (!best) {
      best = &cell;
      continue;
    }
    if (cell.converged != best->converged) {
      if (cell.converged) best = &cell;
      continue;
    }
    if (cell.iterations < best->iterations) best = &cell;
  }
  if (!best) throw std::invalid_argument("permeability not present in sweep");
  return best->delta;
}

CalibrationResult calibrate_kdr(TestCase tc, Disc disc, double kappa_min,
                                const std::vector<double>& delta_grid_in, double eps_u,
                                double eps_p, int max_iter) {
  std::vector<double> grid = delta_grid_in.empty() ? default_delta_grid() : delta_grid_in;
  if (grid.size() < 2 || !std::is_sorted(grid.begin(), grid.end()))
    throw std::invalid_argument("delta grid must be sorted with at least two points");
  double step = 0.0;
  for (size_t i = 1; i < grid.size(); ++i) step = std::max(step, grid[i] - grid[i - 1]);
  if (step > 0.05 + 1e-12)
    throw std::invalid_argument("delta grid resolution must be at most 0.05");

  const CaseDefinition def0 = build_case(tc, kappa_min);
  FunctionSpace p_space(def0.mesh, SpaceKind::P1Scalar);
  const double C_omega = estimate_poincare(p_space, case_pressure_dirichlet(def0)).C_omega;
  const double alpha = def0.problem.coeff.alpha;

  CalibrationResult res;
  for (int i = 0; i <= 20; ++i) res.c_grid.push_back(1.0 + 0.05 * i);
  const int nc = static_cast<int>(res.c_grid.size());
  const int nd = static_cast<int>(grid.size());

  Scenario empty;
  std::vector<CellOut> outs(static_cast<size_t>(nc) * nd);
  run_pool(nc * nd, [&](int i) {
    const int id = i % nd;
    const int ic = i / nd;
    const double K = res.c_grid[ic] * def0.mu + def0.lambda;
    const double L = alpha * alpha / (grid[id] * K);
    outs[i] = run_single(tc, disc, empty, kappa_min, L, eps_u, eps_p, max_iter);
  });

  res.mismatch.resize(nc);
  int best = -1;
  for (int ic = 0; ic < nc; ++ic) {
    const double K = res.c_grid[ic] * def0.mu + def0.lambda;
    RateModel model;
    model.alpha = alpha;
    model.M = def0.problem.coeff.M;
    model.tau = def0.problem.tau;
    model.kappa = kappa_min;
    model.C_omega = C_omega;
    model.beta = K;
    model.K_dr = K;
    const double star = optimal_delta(model);

    int best_cell = -1;
    for (int id = 0; id < nd; ++id) {
      const CellOut& o = outs[static_cast<size_t>(ic) * nd + id];
      if (best_cell < 0) {
        best_cell = id;
        continue;
      }
      const CellOut& b = outs[static_cast<size_t>(ic) * nd + best_cell];
      if (o.converged != b.converged) {
        if (o.converged) best_cell = id;
        continue;
      }
      if (o.iterations < b.iterations) best_cell = id;
    }
    res.mismatch[ic] = std::abs(grid[best_cell] - star);
    if (best < 0 || res.mismatch[ic] < res.mismatch[best]) {
      best = ic;
      res.c = res.c_grid[ic];
      res.K_dr = K;
      res.delta_star = star;
      res.empirical_argmin = grid[best_cell];
    }
  }
  res.matched = res.mismatch[best] <= 0.5 * step + 1e-9;
  return res;
}

void write_sweep_csv(const SweepResult& result, std::ostream& out) {
  out << "test_case,disc,kappa,delta,L,iterations,converged,observed_rate,delta_star\n";
  const std::string tc = to_string(result.config.test_case);
  const std::string disc = to_string(result.config.disc);
  for (const auto& cell : result.cells) {
    out << tc << ',' << disc << ',' << fmt17(cell.kappa) << ',' << fmt17(cell.delta) << ','
        << fmt17(cell.L) << ',' << fmt17(cell.iterations) << ',' << (cell.converged ? 1 : 0)
        << ',' << fmt17(cell.observed_rate) << ',' << fmt17(cell.delta_star) << '\n';
  }
}

SweepResult read_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      trim(line) != "test_case,disc,kappa,delta,L,iterations,converged,observed_rate,delta_star")
    throw std::runtime_error("sweep csv: bad header");
  SweepResult res;
  res.K_dr = res.beta = res.C_omega = res.gamma = res.mu = res.lambda = kNaN;
  bool first = true;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) fields.push_back(item);
    if (fields.size() != 9) throw std::runtime_error("sweep csv: expected 9 fields");
    const TestCase tc = test_case_from_string(fields[0]);
    const Disc disc = disc_from_string(fields[1]);
    if (first) {
      res.config.test_case = tc;
      res.config.disc = disc;
      first = false;
    } else if (tc != res.config.test_case || disc != res.config.disc) {
      throw std::runtime_error("sweep csv: mixed case rows");
    }
    SweepCell cell;
    cell.kappa = std::strtod(fields[2].c_str(), nullptr);
    cell.delta = std::strtod(fields[3].c_str(), nullptr);
    cell.L = std::strtod(fields[4].c_str(), nullptr);
    cell.iterations = std::strtod(fields[5].c_str(), nullptr);
    cell.converged = fields[6] == "1";
    cell.observed_rate = std::strtod(fields[7].c_str(), nullptr);
    cell.delta_star = std::strtod(fields[8].c_str(), nullptr);
    res.cells.push_back(cell);
  }
  for (const auto& cell : res.cells) {
    if (res.config.kappa_list.empty() || res.config.kappa_list.back() != cell.kappa)
      res.config.kappa_list.push_back(cell.kappa);
  }
  std::sort(res.config.kappa_list.begin(), res.config.kappa_list.end());
  res.config.kappa_list.erase(
      std::unique(res.config.kappa_list.begin(), res.config.kappa_list.end()),
      res.config.kappa_list.end());
  for (const auto& cell : res.cells)
    if (cell.kappa == res.cells.front().kappa) res.config.delta_grid.push_back(cell.delta);
  return res;
}

void write_sweep_svg(const SweepResult& result, std::ostream& out) {
  const int W = 800, H = 600;
  const double ml = 70, mr = 170, mt = 50, mb = 60;
  const double pw_ = W - ml - mr, ph = H - mt - mb;
  const auto& kappas = result.config.kappa_list;
  const auto& deltas = result.config.delta_grid;

  double xmin = deltas.empty() ? 0.0 : deltas.front();
  double xmax = deltas.empty() ? 1.0 : deltas.back();
  if (xmax <= xmin) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  double ymax = 1.0;
  for (const auto& cell : result.cells) ymax = std::max(ymax, cell.iterations);
  const double ypad = ymax * 1.08;
  const auto fx = [&](double d) { return ml + (d - xmin) / (xmax - xmin) * pw_; };
  const auto fy = [&](double v) { return mt + ph - v / ypad * ph; };
  char buf[128];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                   "#9467bd", "#8c564b", "#e377c2", "#17becf"};

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\""
      << " font-size=\"16\">" << to_string(result.config.test_case) << "  "
      << to_string(result.config.disc);
  if (result.config.random_mode != RandomMode::None)
    out << "  " << to_string(result.config.random_mode);
  out << "</text>\n";

  out << "<line x1=\"" << num(ml) << "\" y1=\"" << num(mt + ph) << "\" x2=\"" << num(ml + pw_)
      << "\" y2=\"" << num(mt + ph) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << num(ml) << "\" y1=\"" << num(mt) << "\" x2=\"" << num(ml)
      << "\" y2=\"" << num(mt + ph) << "\" stroke=\"black\"/>\n";

  for (double d = std::ceil(xmin / 0.25 - 1e-9) * 0.25; d <= xmax + 1e-9; d += 0.25) {
    const double x = fx(d);
    out << "<line x1=\"" << num(x) << "\" y1=\"" << num(mt + ph) << "\" x2=\"" << num(x)
        << "\" y2=\"" << num(mt + ph + 5) << "\" stroke=\"black\"/>\n";
    std::snprintf(buf, sizeof(buf), "%.2f", d);
    out << "<text x=\"" << num(x) << "\" y=\"" << num(mt + ph + 20)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << buf
        << "</text>\n";
  }
  {
    const double raw = ypad / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double norm = raw / mag;
    const double ystep = (norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0 : 10.0) * mag;
    for (double v = 0.0; v <= ypad + 1e-9; v += ystep) {
      const double y = fy(v);
      out << "<line x1=\"" << num(ml - 5) << "\" y1=\"" << num(y) << "\" x2=\"" << num(ml)
          << "\" y2=\"" << num(y) << "\" stroke=\"black\"/>\n";
      std::snprintf(buf, sizeof(buf), "%g", v);
      out << "<text x=\"" << num(ml - 9) << "\" y=\"" << num(y + 4)
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" << buf
          << "</text>\n";
    }
  }
  out << "<text x=\"" << num(ml + pw_ / 2) << "\" y=\"" << num(H - 14)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">delta</text>\n";
  out << "<text x=\"20\" y=\"" << num(mt + ph / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\""
      << " transform=\"rotate(-90 20 " << num(mt + ph / 2) << ")\">iterations</text>\n";

  for (size_t ik = 0; ik < kappas.size(); ++ik) {
    const char* color = kPalette[ik % 8];
    std::vector<double> xs, ys;
    double star_delta = kNaN;
    for (const auto& cell : result.cells) {
      if (cell.kappa != kappas[ik]) continue;
      xs.push_back(cell.delta);
      ys.push_back(cell.iterations);
      star_delta = cell.delta_star;
    }
    if (xs.empty()) continue;
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < xs.size(); ++i)
      out << num(fx(xs[i])) << ',' << num(fy(ys[i])) << (i + 1 < xs.size() ? " " : "");
    out << "\"/>\n";
    if (!std::isnan(star_delta)) {
      const double cx = fx(std::min(std::max(star_delta, xmin), xmax));
      const double cy = fy(interp_series(xs, ys, star_delta));
      out << "<polygon fill=\"" << color << "\" stroke=\"black\" stroke-width=\"0.8\" points=\"";
      for (int k = 0; k < 10; ++k) {
        const double ang = -1.5707963267948966 + k * 0.6283185307179586;
        const double r = (k % 2 == 0) ? 9.0 : 3.8;
        out << num(cx + r * std::cos(ang)) << ',' << num(cy + r * std::sin(ang))
            << (k < 9 ? " " : "");
      }
      out << "\"/>\n";
    }
    const double ly = mt + 14 + 18.0 * ik;
    out << "<line x1=\"" << num(W - mr + 14) << "\" y1=\"" << num(ly - 4) << "\" x2=\""
        << num(W - mr + 38) << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color
        << "\" stroke-width=\"1.5\"/>\n";
    std::snprintf(buf, sizeof(buf), "%.0e", kappas[ik]);
    out << "<text x=\"" << num(W - mr + 44) << "\" y=\"" << num(ly)
        << "\" font-family=\"sans-serif\" font-size=\"12\">kappa = " << buf << "</text>\n";
  }
  const double ly = mt + 14 + 18.0 * kappas.size();
  out << "<text x=\"" << num(W - mr + 14) << "\" y=\"" << num(ly)
      << "\" font-family=\"sans-serif\" font-size=\"12\">star: predicted optimum</text>\n";
  out << "</svg>\n";
}

void write_run_json(const SweepResult& result, std::ostream& out) {
  nlohmann::json j;
  const auto& cfg = result.config;
  j["config"]["test_case"] = to_string(cfg.test_case);
  j["config"]["disc"] = to_string(cfg.disc);
  j["config"]["kappa_list"] = cfg.kappa_list;
  j["config"]["delta_grid"] = cfg.delta_grid;
  j["config"]["k_dr"] = to_string(cfg.k_dr_expression);
  j["config"]["beta"] = to_string(cfg.beta_mode);
  j["config"]["random_mode"] = to_string(cfg.random_mode);
  j["config"]["num_realizations"] = cfg.num_realizations;
  j["config"]["seed"] = cfg.seed;
  std::vector<std::uint64_t> children;
  for (int r = 0; r < cfg.num_realizations; ++r) children.push_back(child_seed(cfg.seed, r));
  j["config"]["child_seeds"] = children;
  j["config"]["eps_u"] = cfg.eps_u;
  j["config"]["eps_p"] = cfg.eps_p;
  j["config"]["max_iter"] = cfg.max_iter;
  j["config"]["output_dir"] = cfg.output_dir;
  j["constants"]["mu"] = result.mu;
  j["constants"]["lambda"] = result.lambda;
  j["constants"]["K_dr"] = result.K_dr;
  j["constants"]["beta"] = result.beta;
  j["constants"]["C_omega"] = result.C_omega;
  j["constants"]["gamma"] = result.gamma;  // null when not estimated
  nlohmann::json stars = nlohmann::json::object();
  for (const auto& cell : result.cells) {
    const std::string key = fmt17(cell.kappa);
    if (!stars.contains(key)) stars[key] = cell.delta_star;
  }
  j["delta_star"] = stars;
  j["num_cells"] = result.cells.size();
  out << j.dump(2) << '\n';
}

void emit_outputs(const SweepResult& result, const std::string& output_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  const auto open = [&](const char* name) {
    const std::string path = (fs::path(output_dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
  };
  {
    auto out = open("sweep.csv");
    write_sweep_csv(result, out);
    if (!out) throw std::runtime_error("failed writing sweep.csv in " + output_dir);
  }
  {
    auto out = open("sweep.svg");
    write_sweep_svg(result, out);
    if (!out) throw std::runtime_error("failed writing sweep.svg in " + output_dir);
  }
  {
    auto out = open("run.json");
    write_run_json(result, out);
    if (!out) throw std::runtime_error("failed writing run.json in " + output_dir);
  }
}

}  // namespace fsl
