#include "fsl/biot.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace fsl {

namespace {

void validate_coefficients(const BiotCoefficients& c) {
  if (!(c.mu > 0.0) || !(c.lambda >= 0.0)) throw std::invalid_argument("elastic moduli out of range");
  if (!(c.alpha > 0.0)) throw std::invalid_argument("coupling coefficient must be positive");
  if (!(c.M > 0.0)) throw std::invalid_argument("compressibility modulus must be positive");
  if (!(c.kappa > 0.0)) throw std::invalid_argument("permeability must be positive");
}

int checked_step_count(double t0, double T, double tau) {
  if (!(tau > 0.0) || !(T > t0)) throw std::invalid_argument("empty or inverted time grid");
  const double raw = (T - t0) / tau;
  const int n = static_cast<int>(std::lround(raw));
  if (n < 1 || std::abs(raw - n) > 1e-9 * std::max(1.0, raw))
    throw std::invalid_argument("time horizon must be an integer number of steps");
  return n;
}

double relative_increment(const Vector& next, const Vector& prev) {
  const double inc = inf_norm(next - prev);
  const double scale = inf_norm(next);
  return scale < 1e-300 ? inc : inc / scale;
}

}  // namespace

namespace {

/// Eliminated matrix and its factorization, built together because
/// Eigen factor objects cannot be moved.
struct FlowFactor {
  EliminatedOperator elim;
  SpdSolver solver;
  FlowFactor(const SpMat& W, const DirichletSet& bc) : elim(W, bc), solver(elim.matrix()) {}
};

}  // namespace

struct BiotSolver::Cache {
  std::optional<EliminatedOperator> mech_elim;
  std::optional<SpdSolver> mech;
  SpMat mono_matrix;
  std::optional<EliminatedOperator> mono_elim;
  std::optional<EquilibratedLuSolver> mono;
  std::map<double, std::unique_ptr<FlowFactor>> flow;  // keyed by L
  std::vector<int> bc_u_dofs, bc_p_dofs;
};

BiotSolver::BiotSolver(const Mesh& mesh, Disc disc, const BiotProblem& problem)
    : mesh_(&mesh),
      u_space_(mesh, disc == Disc::P2P1 ? SpaceKind::P2Vector2 : SpaceKind::P1Vector2),
      p_space_(mesh, SpaceKind::P1Scalar),
      problem_(problem),
      cache_(std::make_shared<Cache>()) {
  validate_coefficients(problem_.coeff);
  num_steps_ = checked_step_count(problem_.t0, problem_.T, problem_.tau);

  A_ = assemble_elasticity(u_space_, problem_.coeff.mu, problem_.coeff.lambda);
  D_ = assemble_coupling(u_space_, p_space_);
  Dt_ = SpMat(D_.transpose());
  Mp_ = assemble_pressure_mass(p_space_);
  Kp_ = assemble_pressure_stiffness(p_space_, problem_.coeff.kappa);

  cache_->bc_u_dofs = dirichlet_u_at(problem_.t0).dofs();
  cache_->bc_p_dofs = dirichlet_p_at(problem_.t0).dofs();
}

DirichletSet BiotSolver::dirichlet_u_at(double t) const {
  std::vector<std::pair<int, double>> pairs;
  for (const auto& [tg, bc] : problem_.bcs) {
    if (bc.fix_ux) {
      auto c = boundary_constraints(u_space_, {tg}, 0, bc.ux, t);
      pairs.insert(pairs.end(), c.begin(), c.end());
    }
    if (bc.fix_uy) {
      auto c = boundary_constraints(u_space_, {tg}, 1, bc.uy, t);
      pairs.insert(pairs.end(), c.begin(), c.end());
    }
  }
  return DirichletSet::from_pairs(std::move(pairs));
}

DirichletSet BiotSolver::dirichlet_p_at(double t) const {
  std::vector<std::pair<int, double>> pairs;
  for (const auto& [tg, bc] : problem_.bcs) {
    if (bc.fix_p) {
      auto c = boundary_constraints(p_space_, {tg}, 0, bc.p, t);
      pairs.insert(pairs.end(), c.begin(), c.end());
    }
  }
  return DirichletSet::from_pairs(std::move(pairs));
}

const std::vector<int>& BiotSolver::dirichlet_u_dofs() const { return cache_->bc_u_dofs; }
const std::vector<int>& BiotSolver::dirichlet_p_dofs() const { return cache_->bc_p_dofs; }

Loads BiotSolver::loads_at(double t) const {
  const auto& c = problem_.coeff;
  return assemble_loads(u_space_, p_space_, problem_.body_force, problem_.fluid_source,
                        {c.kappa * c.g_rho.x, c.kappa * c.g_rho.y}, t);
}

DiscreteState BiotSolver::initial_state() const {
  DiscreteState s;
  s.time = problem_.t0;
  s.u = problem_.initial_u ? interpolate(u_space_, problem_.initial_u, problem_.t0)
                           : Vector::Zero(u_space_.num_dofs());
  s.p = problem_.initial_p ? interpolate(p_space_, problem_.initial_p, problem_.t0)
                           : Vector::Zero(p_space_.num_dofs());
  return s;
}

DiscreteState BiotSolver::monolithic_step(const DiscreteState& prev, int n) const {
  if (n < 1 || n > num_steps_) throw std::invalid_argument("step index out of range");
  const double t = time_of_step(n);
  const auto& c = problem_.coeff;
  const int nu = u_space_.num_dofs();
  const int np = p_space_.num_dofs();

  if (!cache_->mono_elim) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(A_.nonZeros() + 2 * D_.nonZeros() + Mp_.nonZeros() + Kp_.nonZeros());
    for (int k = 0; k < A_.outerSize(); ++k)
      for (SpMat::InnerIterator it(A_, k); it; ++it)
        trip.emplace_back(it.row(), it.col(), it.value());
    for (int k = 0; k < D_.outerSize(); ++k)
      for (SpMat::InnerIterator it(D_, k); it; ++it) {
        trip.emplace_back(static_cast<int>(it.col()), nu + static_cast<int>(it.row()),
                          -c.alpha * it.value());
        trip.emplace_back(nu + static_cast<int>(it.row()), static_cast<int>(it.col()),
                          c.alpha * it.value());
      }
    const SpMat W = (1.0 / c.M) * Mp_ + problem_.tau * Kp_;
    for (int k = 0; k < W.outerSize(); ++k)
      for (SpMat::InnerIterator it(W, k); it; ++it)
        trip.emplace_back(nu + it.row(), nu + it.col(), it.value());
    cache_->mono_matrix.resize(nu + np, nu + np);
    cache_->mono_matrix.setFromTriplets(trip.begin(), trip.end());

    std::vector<std::pair<int, double>> pairs;
    const auto bu = dirichlet_u_at(t);
    const auto bp = dirichlet_p_at(t);
    for (int i = 0; i < bu.size(); ++i) pairs.emplace_back(bu.dofs()[i], bu.values()[i]);
    for (int i = 0; i < bp.size(); ++i) pairs.emplace_back(nu + bp.dofs()[i], bp.values()[i]);
    cache_->mono_elim.emplace(cache_->mono_matrix, DirichletSet::from_pairs(std::move(pairs)));
    cache_->mono.emplace(cache_->mono_elim->matrix());
  } else {
    const auto bu = dirichlet_u_at(t);
    const auto bp = dirichlet_p_at(t);
    std::vector<double> values = bu.values();
    values.insert(values.end(), bp.values().begin(), bp.values().end());
    cache_->mono_elim->set_values(std::move(values));
  }

  const Loads loads = loads_at(t);
  Vector b(nu + np);
  b.head(nu) = loads.F;
  b.tail(np) = problem_.tau * (loads.Sv + loads.Gv) + (1.0 / c.M) * (Mp_ * prev.p) +
               c.alpha * (D_ * prev.u);
  const Vector x = cache_->mono->solve(cache_->mono_elim->apply_rhs(b), 1e-13);

  DiscreteState out;
  out.time = t;
  out.u = x.head(nu);
  out.p = x.tail(np);
  return out;
}

std::pair<DiscreteState, StepReport> BiotSolver::fixed_stress_step(
    const DiscreteState& prev, int n, const FixedStressConfig& config,
    const DiscreteState* start_iterate) const {
  if (n < 1 || n > num_steps_) throw std::invalid_argument("step index out of range");
  if (!(config.L >= 0.0)) throw std::invalid_argument("stabilization must be nonnegative");
  if (!(config.eps_u > 0.0) || !(config.eps_p > 0.0))
    throw std::invalid_argument("tolerances must be positive");
  if (config.max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");

  const double t = time_of_step(n);
  const auto& c = problem_.coeff;
  const double lin_tol = std::max(1e-15, 1e-3 * std::min(config.eps_u, config.eps_p));

  if (!cache_->mech_elim) {
    cache_->mech_elim.emplace(A_, dirichlet_u_at(t));
    cache_->mech.emplace(cache_->mech_elim->matrix());
  } else {
    cache_->mech_elim->set_values(dirichlet_u_at(t).values());
  }
  auto flow_it = cache_->flow.find(config.L);
  if (flow_it == cache_->flow.end()) {
    const SpMat W = (1.0 / c.M + config.L) * Mp_ + problem_.tau * Kp_;
    flow_it = cache_->flow
                  .emplace(config.L, std::make_unique<FlowFactor>(W, dirichlet_p_at(t)))
                  .first;
  } else {
    flow_it->second->elim.set_values(dirichlet_p_at(t).values());
  }
  EliminatedOperator& flow_elim = flow_it->second->elim;
  const SpdSolver& flow_solver = flow_it->second->solver;

  const Loads loads = loads_at(t);
  const Vector rhs_p_fixed =
      problem_.tau * (loads.Sv + loads.Gv) + (1.0 / c.M) * (Mp_ * prev.p);

  Vector u_old = start_iterate ? start_iterate->u : prev.u;
  Vector p_old = start_iterate ? start_iterate->p : prev.p;
  if (u_old.size() != u_space_.num_dofs() || p_old.size() != p_space_.num_dofs())
    throw std::invalid_argument("iterate size mismatch");

  StepReport report;
  DiscreteState out;
  out.time = t;
  for (int i = 1; i <= config.max_iter; ++i) {
    const Vector rhs_p =
        rhs_p_fixed + config.L * (Mp_ * p_old) - c.alpha * (D_ * (u_old - prev.u));
    const Vector p_new = flow_solver.solve(flow_elim.apply_rhs(rhs_p), lin_tol);
    const Vector rhs_u = loads.F + c.alpha * (Dt_ * p_new);
    const Vector u_new = cache_->mech->solve(cache_->mech_elim->apply_rhs(rhs_u), lin_tol);

    report.iterations = i;
    if (!u_new.allFinite() || !p_new.allFinite()) {
      // overflowed out of the representable range: report divergence and
      // keep the last finite iterate
      const double inf = std::numeric_limits<double>::infinity();
      report.rel_inc_u.push_back(inf);
      report.rel_inc_p.push_back(inf);
      report.inc_p_l2.push_back(inf);
      break;
    }
    report.rel_inc_u.push_back(relative_increment(u_new, u_old));
    report.rel_inc_p.push_back(relative_increment(p_new, p_old));
    const Vector dp = p_new - p_old;
    report.inc_p_l2.push_back(std::sqrt(dp.dot(Mp_ * dp)));
    if (config.record_iterates) report.iterates.push_back({u_new, p_new, t});

    u_old = u_new;
    p_old = p_new;
    if (report.rel_inc_u.back() < config.eps_u && report.rel_inc_p.back() < config.eps_p) {
      report.converged = true;
      break;
    }
  }
  out.u = std::move(u_old);
  out.p = std::move(p_old);
  return {std::move(out), std::move(report)};
}

std::pair<double, double> BiotSolver::coupled_residual(const DiscreteState& prev,
                                                       const DiscreteState& state,
                                                       int n) const {
  const double t = time_of_step(n);
  const auto& c = problem_.coeff;
  const Loads loads = loads_at(t);

  Vector ru = A_ * state.u - c.alpha * (Dt_ * state.p) - loads.F;
  Vector rp = (1.0 / c.M) * (Mp_ * (state.p - prev.p)) + c.alpha * (D_ * (state.u - prev.u)) +
              problem_.tau * (Kp_ * state.p) - problem_.tau * (loads.Sv + loads.Gv);
  for (int d : cache_->bc_u_dofs) ru[d] = 0.0;
  for (int d : cache_->bc_p_dofs) rp[d] = 0.0;
  return {inf_norm(ru), inf_norm(rp)};
}

std::vector<double> contraction_factors(const StepReport& report) {
  std::vector<double> inc = report.inc_p_l2;
  while (!inc.empty() && inc.back() == 0.0) inc.pop_back();
  std::vector<double> factors;
  for (size_t i = 1; i < inc.size(); ++i) {
    if (inc[i - 1] == 0.0) break;
    factors.push_back(inc[i] / inc[i - 1]);
  }
  return factors;
}

double observed_rate(const StepReport& report) {
  if (report.iterations < 3)
    throw std::invalid_argument("observed rate needs at least three iterations");
  const auto factors = contraction_factors(report);
  if (factors.empty()) throw std::invalid_argument("observed rate undefined, increments vanish");
  const size_t n_use = (factors.size() + 1) / 2;
  double acc = 0.0;
  for (size_t i = factors.size() - n_use; i < factors.size(); ++i) acc += std::log(factors[i]);
  return std::exp(acc / n_use);
}

double RunReport::worst_observed_rate() const {
  double worst = std::numeric_limits<double>::quiet_NaN();
  for (const auto& s : steps) {
    if (s.iterations < 3) continue;
    if (contraction_factors(s).empty()) continue;
    const double r = observed_rate(s);
    if (std::isnan(worst) || r > worst) worst = r;
  }
  return worst;
}

RunResult run_time_stepping(const BiotSolver& solver, const RunOptions& options) {
  RunResult result;
  DiscreteState state = options.initial_state ? *options.initial_state : solver.initial_state();
  if (state.u.size() != solver.u_space().num_dofs() ||
      state.p.size() != solver.p_space().num_dofs())
    throw std::invalid_argument("initial state size mismatch");
  state.time = solver.problem().t0;
  result.trajectory.push_back(state);

  for (int n = 1; n <= solver.num_steps(); ++n) {
    try {
      if (options.method == Method::Monolithic) {
        state = solver.monolithic_step(state, n);
        result.report.steps.push_back({});
        result.report.steps.back().converged = true;
      } else {
        auto [next, report] = solver.fixed_stress_step(
            state, n, options.fs, options.start_iterate ? &*options.start_iterate : nullptr);
        state = std::move(next);
        result.report.total_iterations += report.iterations;
        result.report.all_converged = result.report.all_converged && report.converged;
        result.report.steps.push_back(std::move(report));
      }
    } catch (const SolverError& err) {
      throw SolverError("step " + std::to_string(n) + ": " + err.what());
    }
    result.trajectory.push_back(state);
  }
  return result;
}

void write_trajectory(const RunResult& result, std::ostream& out) {
  out.precision(17);
  const int nu = result.trajectory.empty() ? 0 : static_cast<int>(result.trajectory[0].u.size());
  const int np = result.trajectory.empty() ? 0 : static_cast<int>(result.trajectory[0].p.size());
  out << "trajectory " << nu << ' ' << np << ' ' << result.trajectory.size() << '\n';
  for (const auto& s : result.trajectory) {
    out << "t " << s.time << '\n';
    for (int i = 0; i < nu; ++i) out << s.u[i] << (i + 1 == nu ? '\n' : ' ');
    if (nu == 0) out << '\n';
    for (int i = 0; i < np; ++i) out << s.p[i] << (i + 1 == np ? '\n' : ' ');
    if (np == 0) out << '\n';
  }
}

std::vector<DiscreteState> read_trajectory(std::istream& in) {
  std::string word;
  int nu = 0, np = 0;
  size_t count = 0;
  if (!(in >> word >> nu >> np >> count) || word != "trajectory")
    throw std::runtime_error("not a trajectory stream");
  std::vector<DiscreteState> states(count);
  for (auto& s : states) {
    if (!(in >> word >> s.time) || word != "t")
      throw std::runtime_error("malformed trajectory block");
    s.u.resize(nu);
    s.p.resize(np);
    for (int i = 0; i < nu; ++i) in >> s.u[i];
    for (int i = 0; i < np; ++i) in >> s.p[i];
    if (!in) throw std::runtime_error("truncated trajectory block");
  }
  return states;
}

}  // namespace fsl
