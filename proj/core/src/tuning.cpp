#include "fsl/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "fsl/linalg.hpp"

namespace fsl {

void validate(const RateModel& model) {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(model.alpha) || !positive(model.M) || !positive(model.tau) ||
      !positive(model.kappa) || !positive(model.C_omega) || !positive(model.beta) ||
      !positive(model.K_dr))
    throw std::invalid_argument("rate model fields must be positive and finite");
}

double stabilization_for(const RateModel& model, double delta) {
  validate(model);
  if (!(delta > 0.0 && delta <= 2.0))
    throw std::invalid_argument("delta must lie in (0, 2]");
  return model.alpha * model.alpha / (delta * model.K_dr);
}

double theoretical_rate(const RateModel& model, double delta, double L) {
  validate(model);
  if (!(delta > 0.0 && delta <= 2.0))
    throw std::invalid_argument("delta must lie in (0, 2]");
  const double L_min = model.alpha * model.alpha / (delta * model.K_dr);
  if (L < L_min * (1.0 - 1e-12))
    throw std::invalid_argument("stabilization below the admissible bound");
  const double a2 = model.alpha * model.alpha;
  const double denom = L + 2.0 / model.M +
                       2.0 * model.tau * model.kappa / (model.C_omega * model.C_omega) +
                       (2.0 - delta) * a2 / model.beta;
  return L / denom;
}

double optimal_delta(const RateModel& model) {
  validate(model);
  const double B = model.alpha * model.alpha / model.beta;
  const double A = 2.0 / model.M +
                   2.0 * model.tau * model.kappa / (model.C_omega * model.C_omega) + 2.0 * B;
  return std::min(A / (2.0 * B), 2.0);
}

double optimal_L(const RateModel& model) {
  const double delta = optimal_delta(model);
  return model.alpha * model.alpha / (delta * model.K_dr);
}

PoincareEstimate estimate_poincare(const FunctionSpace& p_space,
                                   const std::vector<int>& dirichlet_p) {
  if (p_space.kind() != SpaceKind::P1Scalar)
    throw std::invalid_argument("Poincare estimate expects the pressure space");
  if (dirichlet_p.empty())
    throw std::invalid_argument("Poincare constant undefined without pressure Dirichlet data");

  std::vector<int> sorted = dirichlet_p;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  const auto free = complement_indices(p_space.num_dofs(), sorted);
  if (free.empty()) throw std::invalid_argument("pressure space fully constrained");

  const SpMat Kp = assemble_pressure_stiffness(p_space, 1.0);
  const SpMat Mp = assemble_pressure_mass(p_space);
  const SpMat Kf = restrict_rows_cols(Kp, free, free);
  const SpMat Mf = restrict_rows_cols(Mp, free, free);

  const auto est = smallest_pencil_eigenvalue(Kf, Mf);
  PoincareEstimate out;
  out.lambda_min = est.value;
  out.C_omega = 1.0 / std::sqrt(est.value);
  out.iterations = est.iterations;
  return out;
}

InfSupEstimate estimate_inf_sup(const FunctionSpace& u_space, const FunctionSpace& p_space,
                                double mu, double lambda,
                                const std::vector<int>& dirichlet_u) {
  if (!(mu > 0.0) || !(lambda >= 0.0))
    throw std::invalid_argument("elastic moduli out of range");
  std::vector<int> sorted = dirichlet_u;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  const auto free = complement_indices(u_space.num_dofs(), sorted);

  InfSupEstimate out;
  const int np = p_space.num_dofs();
  if (free.empty()) {
    out.beta_estimate = std::numeric_limits<double>::infinity();
    return out;
  }

  const SpMat A1 = restrict_rows_cols(assemble_elasticity(u_space, mu, lambda), free, free);
  std::vector<int> all_p(np);
  for (int i = 0; i < np; ++i) all_p[i] = i;
  const SpMat D = restrict_rows_cols(assemble_coupling(u_space, p_space), all_p, free);
  const SpMat Mp = assemble_pressure_mass(p_space);
  const SpMat Dt = SpMat(D.transpose());

  SpdSolver asolver(A1);
  auto apply_schur = [&](const Vector& q) -> Vector {
    return D * asolver.solve(Dt * q, 1e-14);
  };

  // Constant pressures are invisible to the coupling exactly when the
  // constrained displacement space has no outflow; deflate them then.
  const Vector ones = Vector::Ones(np);
  const double dscale = std::max(1e-300, Dt.coeffs().size()
                                             ? Dt.coeffs().cwiseAbs().maxCoeff()
                                             : 0.0);
  out.deflated = inf_norm(Dt * ones) <= 1e-12 * dscale;

  const Vector M_ones = Mp * ones;
  const double ones_m = ones.dot(M_ones);
  auto deflate_m = [&](Vector& v) {
    if (out.deflated) v -= (M_ones.dot(v) / ones_m) * ones;
  };
  auto deflate_euclid = [&](Vector& v) {
    if (out.deflated) v -= (ones.dot(v) / static_cast<double>(np)) * ones;
  };

  std::mt19937_64 rng(0x17b5ULL);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Vector q(np);
  for (int i = 0; i < np; ++i) q[i] = unif(rng);
  deflate_m(q);
  const double qs = std::sqrt(q.dot(Mp * q));
  if (!(qs > 0.0)) throw SolverError("inf-sup start vector degenerate");
  q /= qs;

  // zero operator guard (e.g. fully clamped single element)
  if (inf_norm(apply_schur(q)) <= 1e-300) {
    out.beta_estimate = std::numeric_limits<double>::infinity();
    return out;
  }

  double gamma_sq = q.dot(apply_schur(q));
  const double rho0 = gamma_sq;

  // Unstable pairs can have a genuine Schur kernel beyond constants; a
  // tiny mass shift keeps the inner solves definite while the Rayleigh
  // quotient still reports the unshifted eigenvalue (down to zero).
  const double shift = 1e-8 * std::max(rho0, 1e-300);
  auto apply_shifted = [&](const Vector& v) -> Vector {
    return apply_schur(v) + shift * (Mp * v);
  };

  const int cg_cap = 40 * np + 200;
  for (int it = 1; it <= 10000; ++it) {
    Vector z =
        conjugate_gradient(apply_shifted, (Mp * q).eval(), 1e-10, cg_cap, deflate_euclid);
    deflate_m(z);
    const double zn = std::sqrt(z.dot(Mp * z));
    if (!(zn > 0.0)) throw SolverError("inf-sup inverse iteration collapsed");
    q = z / zn;
    const double gs = q.dot(apply_schur(q)) / q.dot(Mp * q);
    out.iterations = it;
    if (std::abs(gs - gamma_sq) <= 1e-6 * std::abs(gs) || gs <= 1e-12 * rho0) {
      gamma_sq = gs;
      break;
    }
    gamma_sq = gs;
  }
  out.gamma_sq = gamma_sq;
  out.gamma = std::sqrt(std::max(gamma_sq, 0.0));
  out.beta_estimate =
      gamma_sq > 0.0 ? 1.0 / gamma_sq : std::numeric_limits<double>::infinity();
  return out;
}

KdrCheck verify_kdr(const FunctionSpace& u_space, const FunctionSpace& p_space, double mu,
                    double lambda, const std::vector<int>& dirichlet_u,
                    double K_dr_candidate) {
  if (!(mu > 0.0) || !(lambda >= 0.0))
    throw std::invalid_argument("elastic moduli out of range");
  std::vector<int> sorted = dirichlet_u;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  const auto free = complement_indices(u_space.num_dofs(), sorted);
  if (free.empty()) throw std::invalid_argument("displacement space fully constrained");

  const SpMat A1 = restrict_rows_cols(assemble_elasticity(u_space, mu, lambda), free, free);
  const int np = p_space.num_dofs();
  std::vector<int> all_p(np);
  for (int i = 0; i < np; ++i) all_p[i] = i;
  const SpMat D = restrict_rows_cols(assemble_coupling(u_space, p_space), all_p, free);
  const SpMat Dt = SpMat(D.transpose());
  SpdSolver msolver(assemble_pressure_mass(p_space));
  SpdSolver asolver(A1);

  auto apply_n = [&](const Vector& x) -> Vector {
    return Dt * msolver.solve(D * x, 1e-14);
  };

  std::mt19937_64 rng(0xd1fULL);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Vector x(A1.rows());
  for (int i = 0; i < x.size(); ++i) x[i] = unif(rng);
  x /= std::sqrt(x.dot(A1 * x));

  double theta = x.dot(apply_n(x));
  if (!(theta > 1e-300))
    throw SolverError("divergence vanishes on the constrained space, ratio undefined");
  // largest eigenvalue of A1^{-1} N in the A1 inner product
  for (int it = 1; it <= 10000; ++it) {
    Vector z = asolver.solve(apply_n(x), 1e-14);
    const double zn = std::sqrt(z.dot(A1 * z));
    if (!(zn > 0.0)) throw SolverError("power iteration collapsed");
    x = z / zn;
    const double theta_new = x.dot(apply_n(x)) / x.dot(A1 * x);
    if (std::abs(theta_new - theta) <= 1e-6 * std::abs(theta_new)) {
      theta = theta_new;
      break;
    }
    theta = theta_new;
  }

  KdrCheck out;
  out.m = 1.0 / theta;
  out.ok = out.m >= K_dr_candidate;
  return out;
}

}  // namespace fsl
