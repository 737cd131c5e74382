#pragma once

#include "icmsim/fit.hpp"
#include "icmsim/mc.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace icmsim::verify {

struct SuiteResult {
  std::string name;
  bool passed = false;
  int checks = 0;
  int failures = 0;
  std::string detail;  ///< first failure, or a short summary
  double seconds = 0.0;
};

/// Free parameters of an assumed study model counted by hand.
Index hand_count_free(Position position, ConstructKind kind, int k);

/// Analytic gradient against central differences on every assumed study model.
SuiteResult gradient_suite(double tolerance = 1e-5);
/// Sigma0 positive definite and reproduced by theta0 for every grid cell and DGP.
SuiteResult sigma0_suite();
/// Composite blocks reproduce arbitrary PD matrices exactly.
SuiteResult hospec_suite();
/// Degrees of freedom against the hand count, and full Jacobian rank.
SuiteResult df_suite();
/// CR and AVE of the fixed latent blocks.
SuiteResult cr_ave_suite();
/// Flags of canned fit reports under `thresholds` against the expected decisions.
SuiteResult fit_flag_suite(const Thresholds& thresholds);
/// Fisher checks of every pair on every distinct population.
SuiteResult fisher_suite(Estimator estimator);
/// Byte-identical CSVs across repeated runs and worker counts; shared samples per replication.
SuiteResult determinism_suite();

/// The four cells of the quick Monte Carlo with `reps` admissible results each.
StudyPlan quick_plan(Estimator estimator, int reps);
/// FNV-1a hash of summary.csv of the quick Monte Carlo, one entry per cell.
std::vector<std::pair<std::string, std::string>> quick_hashes(int reps, int workers);
/// Compares against (or, with `update`, rewrites) the golden JSON file.
SuiteResult golden_suite(const std::filesystem::path& golden, bool update, int workers);

struct Options {
  Thresholds thresholds;
  std::optional<std::filesystem::path> golden;  ///< quick Monte Carlo skipped when empty
  bool update_golden = false;
  int workers = 1;
};

std::vector<SuiteResult> run_all(const Options& options);

}  // namespace icmsim::verify
