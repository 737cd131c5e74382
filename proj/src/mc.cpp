#include "icmsim/mc.hpp"

#include "icmsim/linalg.hpp"
#include "icmsim/ml.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <mutex>
#include <thread>
#include <tuple>

namespace icmsim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr Index kFisherRows = 10000;
constexpr std::uint64_t kFisherSeed = 0x5eed5eedULL;

const std::vector<std::string> kConditionKeys{"id", "position", "n", "K", "sigma", "homogeneous"};
const std::vector<std::string> kKindKeys{"dgp", "assumed"};

std::string canonical_key(std::string_view key) {
  if (key == "k") return "K";
  if (key == "hom") return "homogeneous";
  return std::string(key);
}

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected a boolean, got '" + std::string(v) + "'");
}

double parse_number(std::string_view v) {
  std::size_t used = 0;
  const std::string s(v);
  const double out = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("expected a number, got '" + s + "'");
  return out;
}

bool value_matches(const std::string& key, const std::string& v, const DesignCondition& c) {
  if (key == "id") return static_cast<int>(parse_number(v)) == c.id;
  if (key == "position") return parse_position(v) == c.position;
  if (key == "n") return static_cast<int>(parse_number(v)) == c.n;
  if (key == "K") return static_cast<int>(parse_number(v)) == c.k;
  if (key == "sigma") return std::abs(parse_number(v) - c.sigma) < 1e-9;
  if (key == "homogeneous") return parse_bool(v) == c.homogeneous;
  return true;
}

std::vector<ConstructKind> intersect(const std::vector<ConstructKind>& wanted, const std::vector<ConstructKind>& valid) {
  if (wanted.empty()) return valid;
  std::vector<ConstructKind> out;
  for (auto k : valid)
    if (std::find(wanted.begin(), wanted.end(), k) != wanted.end()) out.push_back(k);
  return out;
}

std::string json_scalar(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw std::invalid_argument("filter values must be scalars");
}

struct AssumedModel {
  ConstructKind kind;
  ModelSpec spec;
  Model model;
  Index df = 0;
};

std::vector<AssumedModel> prepare(const DesignCondition& c, const std::vector<ConstructKind>& kinds, Estimator est) {
  std::vector<AssumedModel> out;
  for (auto kind : kinds) {
    AssumedModel am{kind, study::assumed_model(c.position, kind, c.k), {}, 0};
    am.model = compile(am.spec);
    am.df = degrees_of_freedom(am.model);
    if (est == Estimator::Pls) resolve_modes(am.spec, PlsConfig{});
    out.push_back(std::move(am));
  }
  return out;
}

std::vector<Record> fit_all(const PopulationModel& pop, const PlanCell& cell, const StudyPlan& plan, int rep,
                            const std::vector<const AssumedModel*>& models) {
  const DesignCondition& c = cell.condition;
  const std::uint64_t seed = derive_seed(plan.master_seed, c.id, cell.dgp_kind, static_cast<std::uint64_t>(rep));
  const MatrixXd x = draw_sample(pop, c.n, seed);
  const std::uint64_t hash = hash_matrix(x);
  const MatrixXd s = sample_covariance(x);

  std::vector<Record> out;
  for (const AssumedModel* am : models) {
    Record r;
    r.condition = c;
    r.dgp_kind = cell.dgp_kind;
    r.assumed_kind = am->kind;
    r.estimator = plan.estimator;
    r.rep = rep;
    r.seed = seed;
    r.sample_hash = hash;
    r.paths.fill(kNaN);
    r.f_min = kNaN;
    r.fit.df = am->df;
    try {
      EstimationResult est;
      MatrixXd fitted_to = s;
      if (plan.estimator == Estimator::Ml) {
        est = fit_ml(am->model, s, c.n);
      } else {
        PlsResult pr = fit_pls(am->spec, x);
        fitted_to = pr.sample_corr;
        est = std::move(pr.estimate);
      }
      r.reasons = est.reasons;
      for (std::size_t j = 0; j < 3 && j < est.std_paths.size(); ++j) r.paths[j] = est.std_paths[j];
      r.f_min = est.f_min;
      r.fit = evaluate_fit(est, fitted_to, c.n, am->df, plan.thresholds);
    } catch (const NumericError&) {
      r.reasons = {Reason::Nonconvergence};
      apply_flags(r.fit, plan.thresholds);
    }
    r.admissible = r.reasons.empty();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

void add_filter(ConditionFilter& filter, std::string_view expression) {
  const auto eq = expression.find('=');
  if (eq == std::string_view::npos || eq == 0 || eq + 1 == expression.size())
    throw std::invalid_argument("filter must look like key=value[,value...]");
  const std::string key = canonical_key(expression.substr(0, eq));
  const bool known = std::find(kConditionKeys.begin(), kConditionKeys.end(), key) != kConditionKeys.end() ||
                     std::find(kKindKeys.begin(), kKindKeys.end(), key) != kKindKeys.end();
  if (!known) throw std::invalid_argument("unknown filter key '" + key + "'");
  std::string_view rest = expression.substr(eq + 1);
  auto& values = filter[key];
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string v(rest.substr(0, comma));
    if (v.empty()) throw std::invalid_argument("empty filter value");
    if (key == "dgp" || key == "assumed") parse_construct_kind(v);
    values.push_back(v);
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
}

bool matches(const ConditionFilter& filter, const DesignCondition& condition) {
  for (const auto& key : kConditionKeys) {
    const auto it = filter.find(key);
    if (it == filter.end()) continue;
    const bool any = std::any_of(it->second.begin(), it->second.end(),
                                 [&](const std::string& v) { return value_matches(key, v, condition); });
    if (!any) return false;
  }
  return true;
}

bool kind_allowed(const ConditionFilter& filter, std::string_view key, ConstructKind kind) {
  const auto it = filter.find(std::string(key));
  if (it == filter.end()) return true;
  return std::any_of(it->second.begin(), it->second.end(),
                     [&](const std::string& v) { return parse_construct_kind(v) == kind; });
}

void apply_filter(StudyPlan& plan, const ConditionFilter& filter) {
  std::vector<DesignCondition> kept;
  for (const auto& c : plan.conditions)
    if (matches(filter, c)) kept.push_back(c);
  plan.conditions = std::move(kept);
  const std::vector<ConstructKind> all{ConstructKind::LatentVariable, ConstructKind::CausalFormative,
                                       ConstructKind::Composite};
  auto narrow = [&](std::vector<ConstructKind>& kinds, std::string_view key) {
    if (!filter.contains(std::string(key))) return;
    std::vector<ConstructKind> out;
    for (auto k : kinds.empty() ? all : kinds)
      if (kind_allowed(filter, key, k)) out.push_back(k);
    kinds = out;
    if (kinds.empty()) throw std::invalid_argument("filter leaves no construct kinds");
  };
  narrow(plan.dgp_kinds, "dgp");
  narrow(plan.assumed_kinds, "assumed");
  if (plan.conditions.empty() || expand(plan).empty())
    throw std::invalid_argument("filter selects no design conditions");
}

StudyPlan plan_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("study plan must be a JSON object");
  static const std::vector<std::string> keys{"estimator",  "target_admissible", "attempt_cap_multiplier",
                                             "master_seed", "dgp_kinds",         "assumed_kinds",
                                             "condition_ids", "filter",          "thresholds"};
  for (const auto& [key, value] : doc.items())
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw std::invalid_argument("unknown study plan key '" + key + "'");

  StudyPlan plan;
  if (doc.contains("estimator")) plan.estimator = parse_estimator(doc.at("estimator").get<std::string>());
  if (doc.contains("target_admissible")) plan.target_admissible = doc.at("target_admissible").get<int>();
  if (doc.contains("attempt_cap_multiplier")) plan.attempt_cap_multiplier = doc.at("attempt_cap_multiplier").get<int>();
  if (doc.contains("master_seed")) plan.master_seed = doc.at("master_seed").get<std::uint64_t>();
  for (const auto& k : doc.value("dgp_kinds", nlohmann::json::array()))
    plan.dgp_kinds.push_back(parse_construct_kind(k.get<std::string>()));
  for (const auto& k : doc.value("assumed_kinds", nlohmann::json::array()))
    plan.assumed_kinds.push_back(parse_construct_kind(k.get<std::string>()));
  if (doc.contains("condition_ids")) {
    const auto grid = design_grid();
    plan.conditions.clear();
    for (const auto& id : doc.at("condition_ids")) {
      const int i = id.get<int>();
      if (i < 0 || i >= static_cast<int>(grid.size())) throw std::invalid_argument("condition id out of range");
      plan.conditions.push_back(grid[static_cast<std::size_t>(i)]);
    }
  }
  if (doc.contains("thresholds")) {
    const auto& t = doc.at("thresholds");
    plan.thresholds.chi2_alpha = t.value("chi2_alpha", plan.thresholds.chi2_alpha);
    plan.thresholds.srmr_max = t.value("srmr_max", plan.thresholds.srmr_max);
    plan.thresholds.cfi_min = t.value("cfi_min", plan.thresholds.cfi_min);
    plan.thresholds.rmsea_max = t.value("rmsea_max", plan.thresholds.rmsea_max);
    plan.thresholds.cr_min = t.value("cr_min", plan.thresholds.cr_min);
    plan.thresholds.ave_min = t.value("ave_min", plan.thresholds.ave_min);
  }
  if (plan.target_admissible < 2) throw std::invalid_argument("target_admissible must be at least 2");
  if (plan.attempt_cap_multiplier < 1) throw std::invalid_argument("attempt_cap_multiplier must be positive");
  if (doc.contains("filter")) {
    ConditionFilter filter;
    for (const auto& [key, value] : doc.at("filter").items()) {
      std::string expr = key + "=";
      if (value.is_array()) {
        for (std::size_t i = 0; i < value.size(); ++i) expr += (i ? "," : "") + json_scalar(value[i]);
      } else {
        expr += json_scalar(value);
      }
      add_filter(filter, expr);
    }
    apply_filter(plan, filter);
  }
  return plan;
}

nlohmann::json to_json(const StudyPlan& plan) {
  nlohmann::json ids = nlohmann::json::array();
  for (const auto& c : plan.conditions) ids.push_back(c.id);
  auto kinds = [](const std::vector<ConstructKind>& ks) {
    nlohmann::json out = nlohmann::json::array();
    for (auto k : ks) out.push_back(std::string(to_string(k)));
    return out;
  };
  const Thresholds& t = plan.thresholds;
  return {{"estimator", std::string(to_string(plan.estimator))},
          {"target_admissible", plan.target_admissible},
          {"attempt_cap_multiplier", plan.attempt_cap_multiplier},
          {"master_seed", plan.master_seed},
          {"dgp_kinds", kinds(plan.dgp_kinds)},
          {"assumed_kinds", kinds(plan.assumed_kinds)},
          {"condition_ids", ids},
          {"thresholds",
           {{"chi2_alpha", t.chi2_alpha},
            {"srmr_max", t.srmr_max},
            {"cfi_min", t.cfi_min},
            {"rmsea_max", t.rmsea_max},
            {"cr_min", t.cr_min},
            {"ave_min", t.ave_min}}}};
}

std::vector<PlanCell> expand(const StudyPlan& plan) {
  std::vector<PlanCell> cells;
  for (const auto& c : plan.conditions) {
    const auto assumed = intersect(plan.assumed_kinds, study::assumed_kinds(c.position, plan.estimator));
    if (assumed.empty()) continue;
    for (auto dgp : intersect(plan.dgp_kinds, study::dgp_kinds(c.position))) cells.push_back({c, dgp, assumed});
  }
  return cells;
}

std::uint64_t hash_matrix(const MatrixXd& m) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
  const std::size_t len = static_cast<std::size_t>(m.size()) * sizeof(double);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  for (std::size_t t = 0; t < n; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<Record> fit_replication(const PopulationModel& pop, const PlanCell& cell, const StudyPlan& plan, int rep,
                                    const std::vector<ConstructKind>& assumed) {
  const auto models = prepare(cell.condition, assumed, plan.estimator);
  std::vector<const AssumedModel*> ptrs;
  for (const auto& m : models) ptrs.push_back(&m);
  return fit_all(pop, cell, plan, rep, ptrs);
}

std::vector<SummaryRow> aggregate(std::vector<Record> records, const std::array<double, 3>& truth, int target) {
  auto key = [](const Record& r) {
    return std::make_tuple(r.condition.id, static_cast<int>(r.dgp_kind), static_cast<int>(r.assumed_kind),
                           static_cast<int>(r.estimator), r.rep);
  };
  std::sort(records.begin(), records.end(), [&](const Record& a, const Record& b) { return key(a) < key(b); });

  std::vector<SummaryRow> out;
  for (std::size_t begin = 0; begin < records.size();) {
    std::size_t end = begin;
    auto group = [&](const Record& r) { return std::get<0>(key(r)) == std::get<0>(key(records[begin])) &&
                                               std::get<1>(key(r)) == std::get<1>(key(records[begin])) &&
                                               std::get<2>(key(r)) == std::get<2>(key(records[begin])) &&
                                               std::get<3>(key(r)) == std::get<3>(key(records[begin])); };
    while (end < records.size() && group(records[end])) ++end;

    SummaryRow row;
    const Record& first = records[begin];
    row.condition = first.condition;
    row.dgp_kind = first.dgp_kind;
    row.assumed_kind = first.assumed_kind;
    row.estimator = first.estimator;
    row.n_attempts = static_cast<int>(end - begin);
    std::vector<const Record*> ok;
    for (std::size_t i = begin; i < end; ++i)
      if (records[i].admissible) ok.push_back(&records[i]);
    row.n_admissible = static_cast<int>(ok.size());
    row.inadmissibility = 1.0 - static_cast<double>(row.n_admissible) / static_cast<double>(row.n_attempts);
    row.truncated = row.n_admissible < target;
    row.estimable = row.n_admissible >= 2;
    const double n_ok = static_cast<double>(ok.size());
    for (std::size_t j = 0; j < 3; ++j) {
      PathStats& ps = row.paths[j];
      ps.truth = truth[j];
      if (!row.estimable) {
        ps.mean = ps.bias = ps.variance = ps.mse = kNaN;
        continue;
      }
      double sum = 0.0;
      for (const Record* r : ok) sum += r->paths[j];
      ps.mean = sum / n_ok;
      double ss = 0.0;
      for (const Record* r : ok) ss += (r->paths[j] - ps.mean) * (r->paths[j] - ps.mean);
      ps.variance = ss / (n_ok - 1.0);
      ps.bias = ps.mean - truth[j];
      ps.mse = ps.bias * ps.bias + ps.variance;
    }
    for (std::size_t c = 0; c < kCriteria.size(); ++c) {
      int applicable = 0, flagged = 0;
      for (const Record* r : ok)
        if (r->fit.flags[c].has_value()) {
          ++applicable;
          flagged += *r->fit.flags[c] ? 1 : 0;
        }
      row.flag_rate[c] = applicable > 0 ? static_cast<double>(flagged) / applicable : kNaN;
    }
    out.push_back(row);
    begin = end;
  }
  return out;
}

CellOutput run_condition(const PlanCell& cell, const StudyPlan& plan, int workers) {
  const PopulationModel pop = build_population(cell.condition, cell.dgp_kind);
  const auto models = prepare(cell.condition, cell.assumed, plan.estimator);
  const int target = plan.target_admissible;
  const int cap = target * plan.attempt_cap_multiplier;

  struct State {
    int admissible = 0;
    bool done = false;
    std::vector<Record> kept;
  };
  std::vector<State> states(models.size());
  int next = 0;
  while (next < cap) {
    std::vector<const AssumedModel*> active;
    std::vector<std::size_t> active_idx;
    int needed = 0;
    double rate = 1.0;
    for (std::size_t a = 0; a < models.size(); ++a) {
      if (states[a].done) continue;
      active.push_back(&models[a]);
      active_idx.push_back(a);
      needed = std::max(needed, target - states[a].admissible);
      if (!states[a].kept.empty())
        rate = std::min(rate, std::max(0.05, static_cast<double>(states[a].admissible) / states[a].kept.size()));
    }
    if (active.empty()) break;
    const int wave = std::clamp(static_cast<int>(std::ceil(needed / rate)), 1, cap - next);

    std::vector<std::vector<Record>> results(static_cast<std::size_t>(wave));
    parallel_for(results.size(), workers,
                 [&](std::size_t i) { results[i] = fit_all(pop, cell, plan, next + static_cast<int>(i), active); });
    for (auto& batch : results)
      for (std::size_t k = 0; k < batch.size(); ++k) {
        State& st = states[active_idx[k]];
        if (st.done) continue;
        st.admissible += batch[k].admissible ? 1 : 0;
        st.kept.push_back(std::move(batch[k]));
        if (st.admissible >= target) st.done = true;
      }
    next += wave;
  }

  CellOutput out;
  for (auto& st : states)
    for (auto& r : st.kept) out.records.push_back(std::move(r));
  std::stable_sort(out.records.begin(), out.records.end(), [](const Record& a, const Record& b) {
    return a.rep < b.rep;
  });
  out.summary = aggregate(out.records, pop.std_paths0, target);
  return out;
}

StudyOutput run_study(const StudyPlan& plan, int workers) {
  StudyOutput out;
  for (const auto& cell : expand(plan)) {
    CellOutput co = run_condition(cell, plan, workers);
    out.records.insert(out.records.end(), std::make_move_iterator(co.records.begin()),
                       std::make_move_iterator(co.records.end()));
    out.summary.insert(out.summary.end(), co.summary.begin(), co.summary.end());
  }
  return out;
}

bool expected_consistent(Position position, ConstructKind dgp_kind, ConstructKind assumed_kind, Estimator estimator) {
  if (estimator == Estimator::Pls)
    return dgp_kind == assumed_kind && dgp_kind != ConstructKind::CausalFormative;
  if (dgp_kind == assumed_kind) return true;
  return position == Position::Exogenous && assumed_kind == ConstructKind::CausalFormative;
}

FisherOutcome fisher_check(const DesignCondition& condition, ConstructKind dgp_kind, ConstructKind assumed_kind,
                           Estimator estimator) {
  FisherOutcome out;
  out.condition = condition;
  out.dgp_kind = dgp_kind;
  out.assumed_kind = assumed_kind;
  out.estimator = estimator;
  out.expected_consistent = expected_consistent(condition.position, dgp_kind, assumed_kind, estimator);

  const PopulationModel pop = build_population(condition, dgp_kind);
  const std::uint64_t seed = derive_seed(kFisherSeed, condition.id, dgp_kind, 0);
  const MatrixXd x = normalize_to_population(draw_sample(pop, kFisherRows, seed), pop.sigma0);
  const ModelSpec spec = study::assumed_model(condition.position, assumed_kind, condition.k);

  EstimationResult est;
  if (estimator == Estimator::Ml) {
    MlOptions options;
    options.optimizer.gradient_tolerance = 1e-9;
    options.optimizer.max_iterations = 2000;
    est = fit_ml(spec, sample_covariance(x), kFisherRows, options);
  } else {
    est = fit_pls(spec, x).estimate;
  }
  out.reasons = est.reasons;
  out.admissible = est.admissible();
  for (std::size_t j = 0; j < 3; ++j) {
    out.paths[j] = j < est.std_paths.size() ? est.std_paths[j] : kNaN;
    const double dev = std::abs(out.paths[j] - pop.std_paths0[j]);
    out.max_deviation = std::isfinite(dev) ? std::max(out.max_deviation, dev)
                                           : std::numeric_limits<double>::infinity();
  }
  out.pass = out.expected_consistent ? (out.admissible && out.max_deviation < 1e-6) : out.max_deviation > 1e-3;
  return out;
}

}  // namespace icmsim
