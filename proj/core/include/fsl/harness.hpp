#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fsl/biot.hpp"
#include "fsl/mandel.hpp"
#include "fsl/tuning.hpp"

namespace fsl {

enum class TestCase { UnitSquareSetup1, UnitSquareSetup2, LShape, Mandel };
enum class KdrExpression { Calibrated, MuPlusLambda, TwoMuOverDPlusLambda };
enum class BetaMode { EqualKdr, FromInfSupEstimate };
enum class RandomMode { None, M1, M2, M3, M4, M5 };

std::string to_string(TestCase v);
std::string to_string(Disc v);
std::string to_string(KdrExpression v);
std::string to_string(BetaMode v);
std::string to_string(RandomMode v);
TestCase test_case_from_string(const std::string& s);
Disc disc_from_string(const std::string& s);
KdrExpression kdr_expression_from_string(const std::string& s);
BetaMode beta_mode_from_string(const std::string& s);
RandomMode random_mode_from_string(const std::string& s);

struct ExperimentConfig {
  TestCase test_case = TestCase::UnitSquareSetup1;
  Disc disc = Disc::P2P1;
  std::vector<double> kappa_list;  // empty = per-case default list
  std::vector<double> delta_grid;  // empty = default_delta_grid()
  KdrExpression k_dr_expression = KdrExpression::Calibrated;
  BetaMode beta_mode = BetaMode::EqualKdr;
  RandomMode random_mode = RandomMode::None;
  int num_realizations = 20;  // forced to 1 for deterministic runs
  std::uint64_t seed = 0;
  double eps_u = 1e-12;
  double eps_p = 1e-12;
  int max_iter = 1000;
  std::string output_dir = ".";
};

/// Key = value lines, # comments; unknown keys are errors.
ExperimentConfig parse_config_text(std::istream& in);
ExperimentConfig load_config_file(const std::string& path);

std::vector<double> default_delta_grid();  // 1.0 to 2.5, step 0.05
std::vector<double> default_kappas(TestCase tc);
double calibrated_coefficient(TestCase tc);

/// Mesh, baseline problem and material data for one catalog entry at
/// one permeability.
struct CaseDefinition {
  Mesh mesh;
  BiotProblem problem;
  double mu = 0.0;
  double lambda = 0.0;
  double calibrated_c = 1.0;
};

CaseDefinition build_case(TestCase tc, double kappa);

/// Constrained dof lists of a baseline problem, for the constant
/// estimates that are computed once per domain.
std::vector<int> case_pressure_dirichlet(const CaseDefinition& def);
std::vector<int> case_displacement_dirichlet(const CaseDefinition& def, Disc disc);

struct SweepCell {
  double kappa = 0.0;
  double delta = 0.0;
  double L = 0.0;
  double iterations = 0.0;  // averaged over realizations, may be fractional
  bool converged = false;   // every realization and step converged
  double observed_rate = 0.0;  // NaN when undefined
  double delta_star = 0.0;     // theoretical marker for this kappa
};

struct SweepResult {
  ExperimentConfig config;  // resolved lists and realization count
  double mu = 0.0;
  double lambda = 0.0;
  double K_dr = 0.0;
  double beta = 0.0;
  double C_omega = 0.0;
  double gamma = 0.0;  // NaN unless beta came from the inf-sup estimate
  std::vector<SweepCell> cells;  // kappa-major, delta ascending
};

/// Full sweep; randomized modes draw one scenario per realization and
/// average the counts. Cells run on a work pool capped by FSL_THREADS.
SweepResult run_sweep(const ExperimentConfig& config);

/// Delta of the best converged cell for one kappa row; ties take the
/// smallest delta. Falls back to all cells when none converged.
double empirical_argmin_delta(const SweepResult& result, double kappa);

struct CalibrationResult {
  double c = 0.0;
  double K_dr = 0.0;
  double delta_star = 0.0;
  double empirical_argmin = 0.0;
  bool matched = false;  // theory landed within half a grid step
  std::vector<double> c_grid;
  std::vector<double> mismatch;  // |empirical argmin - delta*| per candidate
};

/// Scans K_dr = c*mu + lambda over c in [1, 2] step 0.05 and picks the
/// candidate whose predicted optimum best matches the measured one at
/// the given permeability.
CalibrationResult calibrate_kdr(TestCase tc, Disc disc, double kappa_min,
                                const std::vector<double>& delta_grid, double eps_u = 1e-12,
                                double eps_p = 1e-12, int max_iter = 1000);

/// Writes sweep.csv, sweep.svg and run.json into the directory.
void emit_outputs(const SweepResult& result, const std::string& output_dir);

void write_sweep_csv(const SweepResult& result, std::ostream& out);
SweepResult read_sweep_csv(std::istream& in);
void write_sweep_svg(const SweepResult& result, std::ostream& out);
void write_run_json(const SweepResult& result, std::ostream& out);

/// Worker count: hardware concurrency capped by FSL_THREADS.
int resolve_thread_count();

std::uint64_t child_seed(std::uint64_t seed, std::uint64_t realization);

}  // namespace fsl
