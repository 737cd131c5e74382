#include "icmsim/csv.hpp"
#include "icmsim/mc.hpp"
#include "icmsim/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#ifndef ICMSIM_GOLDEN_FILE
#define ICMSIM_GOLDEN_FILE "golden_summary_hashes.json"
#endif

namespace {

using namespace icmsim;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  std::optional<std::string> estimator;
  std::vector<std::string> filters;
  std::string out;
  int workers = 1;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config, "Study plan JSON")->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.seed, "Master seed");
  cmd->add_option("--reps", a.reps, "Admissible results per assumed model")->check(CLI::PositiveNumber);
  cmd->add_option("--estimator", a.estimator, "ml or pls")->check(CLI::IsMember({"ml", "pls"}));
  cmd->add_option("--filter", a.filters, "key=v1,v2 with key in id, position, n, K, sigma, homogeneous, dgp, assumed")
      ->take_all();
  cmd->add_option("--out", a.out, "Output directory");
  cmd->add_option("--workers", a.workers, "Worker threads")->check(CLI::PositiveNumber);
}

StudyPlan load_plan(const CommonArgs& a) {
  StudyPlan plan;
  if (!a.config.empty()) {
    std::ifstream f(a.config);
    if (!f) throw std::runtime_error("cannot read " + a.config);
    plan = plan_from_json(nlohmann::json::parse(f));
  }
  if (a.seed) plan.master_seed = *a.seed;
  if (a.reps) plan.target_admissible = *a.reps;
  if (a.estimator) plan.estimator = parse_estimator(*a.estimator);
  if (plan.target_admissible < 2) throw std::invalid_argument("--reps must be at least 2");
  ConditionFilter filter;
  for (const auto& f : a.filters) add_filter(filter, f);
  if (!filter.empty()) apply_filter(plan, filter);
  return plan;
}

int cmd_run(const CommonArgs& a) {
  const StudyPlan plan = load_plan(a);
  const std::filesystem::path dir = a.out.empty() ? "results" : a.out;
  const auto cells = expand(plan);
  StudyOutput out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const PlanCell& cell = cells[i];
    CellOutput co = run_condition(cell, plan, a.workers);
    std::cerr << "[" << i + 1 << "/" << cells.size() << "] condition " << cell.condition.id << " dgp "
              << to_string(cell.dgp_kind) << ": " << co.records.size() << " fits\n";
    out.records.insert(out.records.end(), co.records.begin(), co.records.end());
    out.summary.insert(out.summary.end(), co.summary.begin(), co.summary.end());
  }
  csv::write_study(dir, out);
  std::ofstream(dir / "plan.json") << to_json(plan).dump(2) << '\n';
  std::cerr << "wrote " << out.records.size() << " records to " << dir.string() << "\n";
  return 0;
}

int cmd_fisher(const CommonArgs& a) {
  CommonArgs b = a;
  if (!b.estimator) b.estimator = "ml";
  const StudyPlan plan = load_plan(b);
  std::vector<FisherOutcome> outcomes;
  for (const auto& cell : expand(plan))
    for (auto assumed : cell.assumed)
      outcomes.push_back(fisher_check(cell.condition, cell.dgp_kind, assumed, plan.estimator));
  csv::write_fisher(std::cout, outcomes);
  if (!a.out.empty()) {
    std::filesystem::create_directories(a.out);
    std::ofstream f(std::filesystem::path(a.out) / "fisher.csv");
    csv::write_fisher(f, outcomes);
    if (!f) throw std::runtime_error("cannot write fisher.csv");
  }
  int failed = 0;
  for (const auto& o : outcomes) failed += o.pass ? 0 : 1;
  std::cerr << outcomes.size() - static_cast<std::size_t>(failed) << "/" << outcomes.size() << " checks pass\n";
  return failed == 0 ? 0 : 1;
}

int cmd_list(const CommonArgs& a) {
  const StudyPlan plan = load_plan(a);
  csv::write_conditions(std::cout, plan.conditions);
  return 0;
}

int cmd_population(const CommonArgs& a) {
  const StudyPlan plan = load_plan(a);
  const auto cells = expand(plan);
  if (cells.size() != 1)
    throw std::invalid_argument("population needs filters that select one condition and one DGP kind (selected " +
                                std::to_string(cells.size()) + ")");
  const std::string doc = to_json(build_population(cells[0].condition, cells[0].dgp_kind)).dump(2);
  if (a.out.empty()) {
    std::cout << doc << '\n';
  } else {
    std::filesystem::create_directories(a.out);
    std::ofstream f(std::filesystem::path(a.out) / "population.json");
    f << doc << '\n';
    if (!f) throw std::runtime_error("cannot write population.json");
  }
  return 0;
}

int cmd_verify(const CommonArgs& a, const std::string& golden, bool update, bool quick) {
  verify::Options opt;
  opt.thresholds = load_plan(a).thresholds;
  opt.workers = a.workers;
  if (!quick) opt.golden = golden;
  opt.update_golden = update;
  const auto results = verify::run_all(opt);
  int failed = 0;
  std::cout << "suite,status,checks,failures,seconds,detail\n";
  for (const auto& r : results) {
    failed += r.passed ? 0 : 1;
    std::cout << r.name << ',' << (r.passed ? "PASS" : "FAIL") << ',' << r.checks << ',' << r.failures << ','
              << csv::format_number(r.seconds) << ",\"" << r.detail << "\"\n";
  }
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo study of indicator-construct model misspecification"};
  app.require_subcommand(1);

  CommonArgs run_args, fisher_args, verify_args, list_args, pop_args;
  auto* run = app.add_subcommand("run", "Run the Monte Carlo study and write CSV results");
  add_common(run, run_args);
  auto* fisher = app.add_subcommand("fisher", "Fisher-consistency checks on normalized populations");
  add_common(fisher, fisher_args);
  auto* ver = app.add_subcommand("verify", "Run the invariant suites");
  add_common(ver, verify_args);
  std::string golden = ICMSIM_GOLDEN_FILE;
  bool update_golden = false, quick = false;
  ver->add_option("--golden", golden, "Golden summary hash file");
  ver->add_flag("--update-golden", update_golden, "Rewrite the golden file from this build");
  ver->add_flag("--quick", quick, "Skip the seeded quick Monte Carlo");
  auto* list = app.add_subcommand("list-conditions", "Print the design conditions");
  add_common(list, list_args);
  auto* pop = app.add_subcommand("population", "Dump Sigma0 and theta0 of one condition and DGP kind");
  add_common(pop, pop_args);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(run_args);
    if (*fisher) return cmd_fisher(fisher_args);
    if (*ver) return cmd_verify(verify_args, golden, update_golden, quick);
    if (*list) return cmd_list(list_args);
    if (*pop) return cmd_population(pop_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
