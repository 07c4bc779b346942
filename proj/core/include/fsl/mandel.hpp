#pragma once

#include <vector>

#include "fsl/biot.hpp"

namespace fsl {

/// Plate-loaded strip consolidation benchmark on the quarter domain
/// (0,a) x (0,b). Moduli drive both the discrete problem and the
/// closed-form series; B, nu_u and c_f keep the published rounded
/// values for cross-checking against the derived ones.
struct MandelParameters {
  double a = 100.0;  // half width
  double b = 10.0;   // half height
  double force = 6.0e8;  // plate load per unit out-of-plane length

  double mu = 2.475e9;
  double lambda = 1.650e9;
  double alpha = 1.0;
  double M = 1.650e10;
  double kappa = 1.0e-10;

  double B_reported = 0.833;
  double nu_u_reported = 0.44;
  double c_f_reported = 0.47;

  double tau = 10.0;
  double t0 = 0.0;
  double T = 50.0;
};

/// Constants the series needs, derived from the moduli so the series
/// and the discrete problem describe the same material.
struct MandelDerived {
  double nu;       // drained Poisson ratio
  double B;        // Skempton coefficient
  double nu_u;     // undrained Poisson ratio
  double c_f;      // consolidation coefficient
  double c_slope;  // slope in the root equation tan(x) = c x
};

MandelDerived mandel_derived(const MandelParameters& params);

/// Relative gaps between reported and derived constants; `ok` means
/// all gaps are within one percent.
struct MandelConsistency {
  double gap_B = 0.0;
  double gap_nu_u = 0.0;
  double gap_c_f = 0.0;
  double gap_c_f_forms = 0.0;  // storage formula vs undrained-constant formula
  bool ok = false;
};

MandelConsistency mandel_consistency(const MandelParameters& params);

/// Positive solutions of tan(x) = c x, one per branch, refined in
/// extended precision.
struct RootSequence {
  double c = 0.0;
  std::vector<long double> alpha;
  /// max_n |sin a_n - c a_n cos a_n|
  double residual() const;
};

RootSequence mandel_roots(double c, int count);

/// Series evaluations; sums run from the smallest terms up.
double mandel_pressure(const MandelParameters& params, const RootSequence& roots, double x,
                       double t);
double mandel_ux(const MandelParameters& params, const RootSequence& roots, double x, double t);
double mandel_uy(const MandelParameters& params, const RootSequence& roots, double y, double t);

/// Largest change over a probe set when the truncation is halved,
/// relative to the pressure scale. Small values mean the default
/// truncation is converged at the probed times.
double mandel_truncation_gap(const MandelParameters& params, const RootSequence& roots);

/// Quarter-domain problem: symmetry planes on the left and bottom,
/// prescribed plate settlement on top, drained right edge, series
/// initial data.
BiotProblem build_mandel_problem(const MandelParameters& params, int n_terms = 200);

}  // namespace fsl
