#pragma once

#include <vector>

#include "fsl/fem.hpp"

namespace fsl {

/// Parameters entering the a priori contraction estimate of the
/// stabilized flow-then-mechanics splitting.
struct RateModel {
  double alpha = 1.0;    // coupling coefficient
  double M = 1.0;        // compressibility modulus
  double tau = 1.0;      // time step
  double kappa = 1.0;    // permeability over viscosity
  double C_omega = 1.0;  // Poincare constant of the pressure space
  double beta = 1.0;     // divergence-lifting bound
  double K_dr = 1.0;     // bulk coercivity constant
};

void validate(const RateModel& model);

/// Stabilization magnitude alpha^2/(delta*K_dr) tied to a tuning
/// parameter delta in (0,2].
double stabilization_for(const RateModel& model, double delta);

/// Squared-norm contraction factor of the splitting for an admissible
/// pair (delta, L): L / (L + 2/M + 2*tau*kappa/C^2 + (2-delta)*alpha^2/beta).
/// Throws std::invalid_argument outside delta in (0,2] or
/// L < alpha^2/(delta*K_dr).
double theoretical_rate(const RateModel& model, double delta, double L);

/// Minimizer of the rate over the admissible set, clamped to [1,2]:
/// min(A/(2B), 2) with A = 2/M + 2*tau*kappa/C^2 + 2*alpha^2/beta and
/// B = alpha^2/beta.
double optimal_delta(const RateModel& model);

/// Stabilization at the optimal delta; always within
/// [alpha^2/(2*K_dr), alpha^2/K_dr].
double optimal_L(const RateModel& model);

struct PoincareEstimate {
  double C_omega = 0.0;
  double lambda_min = 0.0;  // smallest pressure Laplace eigenvalue
  int iterations = 0;
};

/// Poincare constant 1/sqrt(lambda_min) of the pressure space with the
/// given Dirichlet dofs, from inverse iteration on the unit-kappa
/// stiffness against the mass matrix. Throws std::invalid_argument
/// when no pressure Dirichlet data constrains the space.
PoincareEstimate estimate_poincare(const FunctionSpace& p_space,
                                   const std::vector<int>& dirichlet_p);

struct InfSupEstimate {
  double gamma = 0.0;
  double gamma_sq = 0.0;
  double beta_estimate = 0.0;  // 1/gamma^2, sharp divergence-lifting bound
  bool deflated = false;       // constants removed from the pressure space
  int iterations = 0;
};

/// Discrete inf-sup constant of the displacement-pressure pair in the
/// elasticity energy norm: smallest eigenvalue gamma^2 of the pressure
/// Schur complement D A1^{-1} D^T against the pressure mass, by
/// inverse iteration whose inner solves run conjugate gradients with
/// cached A1 factors. When the constrained displacement space cannot
/// reach constant pressures (D^T 1 = 0) the constant mode is deflated.
InfSupEstimate estimate_inf_sup(const FunctionSpace& u_space, const FunctionSpace& p_space,
                                double mu, double lambda,
                                const std::vector<int>& dirichlet_u);

struct KdrCheck {
  bool ok = false;
  double m = 0.0;  // observed coercivity ratio
};

/// Checks a candidate bulk coercivity constant against the smallest
/// ratio of elastic energy to projected squared divergence over the
/// constrained displacement space, computed from the largest
/// eigenvalue of A1^{-1} (D^T Mp^{-1} D).
KdrCheck verify_kdr(const FunctionSpace& u_space, const FunctionSpace& p_space, double mu,
                    double lambda, const std::vector<int>& dirichlet_u,
                    double K_dr_candidate);

}  // namespace fsl
