#include "fsl/mandel.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace fsl {

namespace {

const long double kPi = std::acos(-1.0L);

long double branch_fn(long double x, long double c) {
  return std::sin(x) - c * x * std::cos(x);
}

long double branch_fn_prime(long double x, long double c) {
  return (1.0L - c) * std::cos(x) + c * x * std::sin(x);
}

/// exp(-a_n^2 q) decay factors share this scaled exponent.
long double decay(long double alpha, long double q) {
  const long double e = alpha * alpha * q;
  return e > 11000.0L ? 0.0L : std::exp(-e);
}

}  // namespace

MandelDerived mandel_derived(const MandelParameters& params) {
  MandelDerived d;
  const double mu = params.mu, la = params.lambda, al = params.alpha, M = params.M;
  if (!(mu > 0.0) || !(la >= 0.0) || !(al > 0.0) || !(M > 0.0) || !(params.kappa > 0.0))
    throw std::invalid_argument("material constants out of range");
  d.nu = la / (2.0 * (la + mu));
  const double K3 = la + 2.0 * mu / 3.0;
  d.B = al * M / (K3 + al * al * M);
  const double x = al * d.B * (1.0 - 2.0 * d.nu);
  d.nu_u = (3.0 * d.nu + x) / (3.0 - x);
  d.c_f = params.kappa * M * (la + 2.0 * mu) / (la + 2.0 * mu + al * al * M);
  if (!(d.nu_u > d.nu)) throw std::invalid_argument("undrained ratio must exceed drained");
  d.c_slope = (1.0 - d.nu) / (d.nu_u - d.nu);
  return d;
}

MandelConsistency mandel_consistency(const MandelParameters& params) {
  const MandelDerived d = mandel_derived(params);
  MandelConsistency r;
  r.gap_B = std::abs(params.B_reported - d.B) / d.B;
  r.gap_nu_u = std::abs(params.nu_u_reported - d.nu_u) / d.nu_u;
  r.gap_c_f = std::abs(params.c_f_reported - d.c_f) / d.c_f;
  const double c_f_undrained = 2.0 * params.kappa * d.B * d.B * params.mu * (1.0 - d.nu) *
                               (1.0 + d.nu_u) * (1.0 + d.nu_u) /
                               (9.0 * (1.0 - d.nu_u) * (d.nu_u - d.nu));
  r.gap_c_f_forms = std::abs(c_f_undrained - d.c_f) / d.c_f;
  r.ok = r.gap_B <= 0.01 && r.gap_nu_u <= 0.01 && r.gap_c_f <= 0.01 && r.gap_c_f_forms <= 0.01;
  return r;
}

double RootSequence::residual() const {
  const long double cl = c;
  long double worst = 0.0L;
  for (long double a : alpha) worst = std::max(worst, std::abs(branch_fn(a, cl)));
  return static_cast<double>(worst);
}

RootSequence mandel_roots(double c, int count) {
  if (!(c > 1.0)) throw std::invalid_argument("root equation needs slope above one");
  if (count < 1) throw std::invalid_argument("need at least one root");
  RootSequence seq;
  seq.c = c;
  seq.alpha.reserve(count);
  const long double cl = c;
  for (int n = 1; n <= count; ++n) {
    long double lo = (n - 1) * kPi;
    long double hi = lo + kPi / 2.0L;
    if (n == 1) lo = 1e-18L;
    long double flo = branch_fn(lo, cl);
    for (int it = 0; it < 200; ++it) {
      const long double mid = 0.5L * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const long double fm = branch_fn(mid, cl);
      if ((fm > 0.0L) == (flo > 0.0L)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    long double root = 0.5L * (lo + hi);
    for (int it = 0; it < 3; ++it) {
      const long double fp = branch_fn_prime(root, cl);
      if (fp == 0.0L) break;
      const long double next = root - branch_fn(root, cl) / fp;
      if (next <= (n - 1) * kPi || next >= (n - 1) * kPi + kPi / 2.0L) break;
      root = next;
    }
    seq.alpha.push_back(root);
  }
  return seq;
}

double mandel_pressure(const MandelParameters& params, const RootSequence& roots, double x,
                       double t) {
  const MandelDerived d = mandel_derived(params);
  const long double q = static_cast<long double>(d.c_f) * t / (params.a * params.a);
  const long double xr = static_cast<long double>(x) / params.a;
  long double sum = 0.0L;
  for (size_t i = roots.alpha.size(); i-- > 0;) {
    const long double a = roots.alpha[i];
    const long double s = std::sin(a), co = std::cos(a);
    sum += s / (a - s * co) * (std::cos(a * xr) - co) * decay(a, q);
  }
  const double pref = 2.0 * params.force * d.B * (1.0 + d.nu_u) / (3.0 * params.a);
  return pref * static_cast<double>(sum);
}

double mandel_ux(const MandelParameters& params, const RootSequence& roots, double x, double t) {
  const MandelDerived d = mandel_derived(params);
  const long double q = static_cast<long double>(d.c_f) * t / (params.a * params.a);
  const long double xr = static_cast<long double>(x) / params.a;
  long double s1 = 0.0L, s2 = 0.0L;
  for (size_t i = roots.alpha.size(); i-- > 0;) {
    const long double a = roots.alpha[i];
    const long double s = std::sin(a), co = std::cos(a);
    const long double den = a - s * co;
    const long double e = decay(a, q);
    s1 += s * co / den * e;
    s2 += co / den * std::sin(a * xr) * e;
  }
  const double F = params.force, mu = params.mu, a0 = params.a;
  return (F * d.nu / (2.0 * mu * a0) - F * d.nu_u / (mu * a0) * static_cast<double>(s1)) * x +
         F / mu * static_cast<double>(s2);
}

double mandel_uy(const MandelParameters& params, const RootSequence& roots, double y, double t) {
  const MandelDerived d = mandel_derived(params);
  const long double q = static_cast<long double>(d.c_f) * t / (params.a * params.a);
  long double s1 = 0.0L;
  for (size_t i = roots.alpha.size(); i-- > 0;) {
    const long double a = roots.alpha[i];
    const long double s = std::sin(a), co = std::cos(a);
    s1 += s * co / (a - s * co) * decay(a, q);
  }
  const double F = params.force, mu = params.mu, a0 = params.a;
  return (-F * (1.0 - d.nu) / (2.0 * mu * a0) +
          F * (1.0 - d.nu_u) / (mu * a0) * static_cast<double>(s1)) *
         y;
}

double mandel_truncation_gap(const MandelParameters& params, const RootSequence& roots) {
  if (roots.alpha.size() < 2) throw std::invalid_argument("need at least two roots");
  RootSequence half;
  half.c = roots.c;
  half.alpha.assign(roots.alpha.begin(), roots.alpha.begin() + roots.alpha.size() / 2);

  const MandelDerived d = mandel_derived(params);
  const double p_scale = 2.0 * params.force * d.B * (1.0 + d.nu_u) / (3.0 * params.a);
  const double u_scale =
      params.force * params.b * (1.0 - d.nu) / (2.0 * params.mu * params.a);
  const double xs[] = {0.0, 0.25 * params.a, 0.5 * params.a, 0.75 * params.a, 0.95 * params.a};
  const double ts[] = {params.tau, params.T};
  double worst = 0.0;
  for (double t : ts) {
    for (double x : xs) {
      worst = std::max(worst, std::abs(mandel_pressure(params, roots, x, t) -
                                       mandel_pressure(params, half, x, t)) /
                                  p_scale);
      worst = std::max(worst, std::abs(mandel_ux(params, roots, x, t) -
                                       mandel_ux(params, half, x, t)) /
                                  u_scale);
    }
    worst = std::max(worst, std::abs(mandel_uy(params, roots, params.b, t) -
                                     mandel_uy(params, half, params.b, t)) /
                                u_scale);
  }
  return worst;
}

BiotProblem build_mandel_problem(const MandelParameters& params, int n_terms) {
  const MandelDerived d = mandel_derived(params);
  auto roots = std::make_shared<const RootSequence>(mandel_roots(d.c_slope, n_terms));
  const MandelParameters ps = params;

  BiotProblem prob;
  prob.coeff.mu = ps.mu;
  prob.coeff.lambda = ps.lambda;
  prob.coeff.alpha = ps.alpha;
  prob.coeff.M = ps.M;
  prob.coeff.kappa = ps.kappa;
  prob.tau = ps.tau;
  prob.t0 = ps.t0;
  prob.T = ps.T;
  prob.p_ref = 2.0 * ps.force * d.B * (1.0 + d.nu_u) / (3.0 * ps.a);

  BoundaryCondition left;
  left.fix_ux = true;  // symmetry plane
  prob.bcs[tag::left] = left;

  BoundaryCondition bottom;
  bottom.fix_uy = true;  // symmetry plane
  prob.bcs[tag::bottom] = bottom;

  BoundaryCondition top;
  top.fix_uy = true;  // rigid frictionless plate follows the series settlement
  top.uy = [ps, roots](double, double y, double t) { return mandel_uy(ps, *roots, y, t); };
  prob.bcs[tag::top] = top;

  BoundaryCondition right;
  right.fix_p = true;  // drained edge
  prob.bcs[tag::right] = right;

  prob.initial_u = [ps, roots](double x, double y, double t) {
    return Vec2{mandel_ux(ps, *roots, x, t), mandel_uy(ps, *roots, y, t)};
  };
  prob.initial_p = [ps, roots](double x, double, double t) {
    return mandel_pressure(ps, *roots, x, t);
  };
  return prob;
}

}  // namespace fsl
