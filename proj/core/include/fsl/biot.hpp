#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "fsl/fem.hpp"
#include "fsl/linalg.hpp"

namespace fsl {

struct BiotCoefficients {
  double mu = 1.0;
  double lambda = 1.0;
  double alpha = 1.0;
  double M = 1.0;      // compressibility modulus
  double kappa = 1.0;  // permeability over viscosity
  Vec2 g_rho{0.0, 0.0};  // gravity times fluid density
};

/// Per-tag essential data. Unset components are natural (zero
/// traction / zero flux), which needs no assembly terms.
struct BoundaryCondition {
  bool fix_ux = false;
  bool fix_uy = false;
  bool fix_p = false;
  ScalarField ux;  // evaluated at node position and step time; null = 0
  ScalarField uy;
  ScalarField p;
};

enum class Disc { P2P1, P1P1 };

struct BiotProblem {
  BiotCoefficients coeff;
  VectorField body_force;    // null = 0
  ScalarField fluid_source;  // null = 0
  std::map<int, BoundaryCondition> bcs;  // keyed by boundary tag
  VectorField initial_u;  // null = 0
  ScalarField initial_p;
  double tau = 1.0;
  double t0 = 0.0;
  double T = 1.0;
  double p_ref = 1.0;  // pressure scale, used by randomized studies
};

struct DiscreteState {
  Vector u;
  Vector p;
  double time = 0.0;
};

/// Stabilized splitting controls. `L` is the stabilization magnitude;
/// build it from a tuning parameter delta via stabilization_for.
struct FixedStressConfig {
  double L = 0.0;
  double eps_u = 1e-12;  // relative inf-norm increment tolerances
  double eps_p = 1e-12;
  int max_iter = 1000;
  bool record_iterates = false;
};

/// Per-time-step iteration record of the splitting.
struct StepReport {
  int iterations = 0;
  bool converged = false;
  std::vector<double> rel_inc_u;  // relative inf-norm increments
  std::vector<double> rel_inc_p;
  std::vector<double> inc_p_l2;   // mass-norm pressure increments
  std::vector<DiscreteState> iterates;  // filled when record_iterates
};

/// Successive ratios of the mass-norm pressure increments; trailing
/// zero increments are dropped.
std::vector<double> contraction_factors(const StepReport& report);

/// Geometric mean of the contraction factors over the last half of the
/// iteration history. Throws std::invalid_argument for reports with
/// fewer than three iterations.
double observed_rate(const StepReport& report);

struct RunReport {
  std::vector<StepReport> steps;
  int total_iterations = 0;
  bool all_converged = true;
  /// Worst defined per-step observed rate; NaN when no step has one.
  double worst_observed_rate() const;
};

struct RunResult {
  std::vector<DiscreteState> trajectory;  // initial state first
  RunReport report;
};

/// Assembles once per problem and hands out time steps. Boundary
/// constraint structure is fixed over the run; values are refreshed at
/// each step time. Factorizations (coupled matrix, elastic block, and
/// one flow block per stabilization magnitude) are cached.
class BiotSolver {
 public:
  BiotSolver(const Mesh& mesh, Disc disc, const BiotProblem& problem);

  const FunctionSpace& u_space() const { return u_space_; }
  const FunctionSpace& p_space() const { return p_space_; }
  const BiotProblem& problem() const { return problem_; }
  int num_steps() const { return num_steps_; }
  double time_of_step(int n) const { return problem_.t0 + n * problem_.tau; }

  const SpMat& elasticity() const { return A_; }
  const SpMat& coupling() const { return D_; }
  const SpMat& pressure_mass() const { return Mp_; }
  const SpMat& pressure_stiffness() const { return Kp_; }
  const std::vector<int>& dirichlet_u_dofs() const;
  const std::vector<int>& dirichlet_p_dofs() const;

  DiscreteState initial_state() const;

  DiscreteState monolithic_step(const DiscreteState& prev, int n) const;

  /// One backward Euler step solved by the flow-then-mechanics
  /// splitting, starting from the previous state unless an explicit
  /// first iterate is supplied. Running past max_iter is reported, not
  /// thrown.
  std::pair<DiscreteState, StepReport> fixed_stress_step(
      const DiscreteState& prev, int n, const FixedStressConfig& config,
      const DiscreteState* start_iterate = nullptr) const;

  /// Coupled-system residual of a state at step n given its
  /// predecessor, per field (mechanics, flow), for consistency checks.
  std::pair<double, double> coupled_residual(const DiscreteState& prev,
                                             const DiscreteState& state, int n) const;

 private:
  struct Cache;
  const Mesh* mesh_;
  FunctionSpace u_space_;
  FunctionSpace p_space_;
  BiotProblem problem_;
  int num_steps_ = 0;
  SpMat A_, D_, Dt_, Mp_, Kp_;
  std::shared_ptr<Cache> cache_;

  Loads loads_at(double t) const;
  DirichletSet dirichlet_u_at(double t) const;
  DirichletSet dirichlet_p_at(double t) const;
};

enum class Method { Monolithic, FixedStress };

struct RunOptions {
  Method method = Method::FixedStress;
  FixedStressConfig fs;
  std::optional<DiscreteState> initial_state;  // overrides interpolated data
  /// Start iterate for every step's splitting (randomized studies).
  std::optional<DiscreteState> start_iterate;
};

RunResult run_time_stepping(const BiotSolver& solver, const RunOptions& options);

/// Text container for a run: header with space sizes, then one block
/// per state (time line, u line, p line).
void write_trajectory(const RunResult& result, std::ostream& out);
std::vector<DiscreteState> read_trajectory(std::istream& in);

}  // namespace fsl
