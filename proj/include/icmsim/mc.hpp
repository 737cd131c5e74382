#pragma once

#include "icmsim/dgp.hpp"
#include "icmsim/fit.hpp"
#include "icmsim/pls.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace icmsim {

/// key -> accepted values; keys: id, position, n, K, sigma, homogeneous, dgp, assumed.
using ConditionFilter = std::map<std::string, std::vector<std::string>>;

/// Parses "key=v1,v2". Throws std::invalid_argument for an unknown key.
void add_filter(ConditionFilter& filter, std::string_view expression);
bool matches(const ConditionFilter& filter, const DesignCondition& condition);
bool kind_allowed(const ConditionFilter& filter, std::string_view key, ConstructKind kind);

struct StudyPlan {
  std::vector<DesignCondition> conditions = design_grid();
  std::vector<ConstructKind> dgp_kinds;      ///< empty: every kind valid for the position
  std::vector<ConstructKind> assumed_kinds;  ///< empty: every kind valid for position and estimator
  Estimator estimator = Estimator::Ml;
  int target_admissible = 1000;
  int attempt_cap_multiplier = 20;
  std::uint64_t master_seed = 1;
  Thresholds thresholds;
};

/// Reads a plan; unspecified fields keep their defaults. A "filter" object
/// narrows the grid and kinds with the same keys as add_filter.
StudyPlan plan_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const StudyPlan& plan);
/// Applies a filter to the plan's conditions and kinds. Throws std::invalid_argument
/// when nothing is left.
void apply_filter(StudyPlan& plan, const ConditionFilter& filter);

/// One (condition, DGP kind) unit of work with the assumed models fitted to it.
struct PlanCell {
  DesignCondition condition;
  ConstructKind dgp_kind = ConstructKind::LatentVariable;
  std::vector<ConstructKind> assumed;
};
/// Cells of a plan with excluded combinations removed.
std::vector<PlanCell> expand(const StudyPlan& plan);

/// One fitted replication.
struct Record {
  DesignCondition condition;
  ConstructKind dgp_kind = ConstructKind::LatentVariable;
  ConstructKind assumed_kind = ConstructKind::LatentVariable;
  Estimator estimator = Estimator::Ml;
  int rep = 0;
  std::uint64_t seed = 0;
  std::uint64_t sample_hash = 0;
  bool admissible = false;
  std::vector<Reason> reasons;
  std::array<double, 3> paths{};
  double f_min = 0.0;
  FitReport fit;
};

struct PathStats {
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double mse = 0.0;
};

/// Aggregate of one (condition, DGP kind, assumed kind, estimator).
struct SummaryRow {
  DesignCondition condition;
  ConstructKind dgp_kind = ConstructKind::LatentVariable;
  ConstructKind assumed_kind = ConstructKind::LatentVariable;
  Estimator estimator = Estimator::Ml;
  std::array<PathStats, 3> paths{};
  int n_attempts = 0;
  int n_admissible = 0;
  double inadmissibility = 0.0;  ///< 1 - n_admissible / n_attempts
  std::array<double, 6> flag_rate{};
  bool truncated = false;
  bool estimable = false;  ///< at least two admissible results
};

/// Groups records by (condition, DGP, assumed, estimator) and aggregates the
/// admissible ones; bias against `truth`, variance with the N-1 divisor.
/// `target` marks rows below it as truncated. The result is independent of record order.
std::vector<SummaryRow> aggregate(std::vector<Record> records, const std::array<double, 3>& truth, int target);

/// Hash of a sample matrix's bytes.
std::uint64_t hash_matrix(const MatrixXd& m);

/// Runs fn(i) for i in [0, count) on `workers` threads.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

/// Fits every assumed model of the cell to one replication's sample.
std::vector<Record> fit_replication(const PopulationModel& pop, const PlanCell& cell, const StudyPlan& plan, int rep,
                                    const std::vector<ConstructKind>& assumed);

struct CellOutput {
  std::vector<Record> records;
  std::vector<SummaryRow> summary;
};

/// Draws replications in waves until each assumed model has `target_admissible`
/// admissible results or the attempt cap is hit. Each assumed model keeps the
/// records up to its N-th admissible result, so the output does not depend on
/// the number of workers.
CellOutput run_condition(const PlanCell& cell, const StudyPlan& plan, int workers = 1);

struct StudyOutput {
  std::vector<Record> records;
  std::vector<SummaryRow> summary;
};
StudyOutput run_study(const StudyPlan& plan, int workers = 1);

/// Whether the estimator is expected to be Fisher consistent for the pair.
bool expected_consistent(Position position, ConstructKind dgp_kind, ConstructKind assumed_kind, Estimator estimator);

struct FisherOutcome {
  DesignCondition condition;
  ConstructKind dgp_kind = ConstructKind::LatentVariable;
  ConstructKind assumed_kind = ConstructKind::LatentVariable;
  Estimator estimator = Estimator::Ml;
  bool expected_consistent = false;
  bool admissible = false;
  std::vector<Reason> reasons;
  std::array<double, 3> paths{};
  double max_deviation = 0.0;
  bool pass = false;
};

/// Fits the assumed model to a moment-normalized population of 10000 rows.
/// Consistent pairs pass with an admissible fit within 1e-6 of the truth,
/// inconsistent pairs with a deviation above 1e-3.
FisherOutcome fisher_check(const DesignCondition& condition, ConstructKind dgp_kind, ConstructKind assumed_kind,
                           Estimator estimator);

}  // namespace icmsim
