#include "icmsim/mc.hpp"
#include "icmsim/verify.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

namespace {

using namespace icmsim;
using Clock = std::chrono::steady_clock;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
int g_workers = 1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

DesignCondition cell(Position pos, int n, int k, double sigma, bool hom) {
  for (const auto& c : design_grid())
    if (c.position == pos && c.n == n && c.k == k && std::abs(c.sigma - sigma) < 1e-9 && c.homogeneous == hom)
      return c;
  throw std::logic_error("condition not in grid");
}

std::vector<SummaryRow> run(std::vector<DesignCondition> conditions, Estimator est, std::vector<ConstructKind> dgp,
                            std::vector<ConstructKind> assumed, int target, std::uint64_t seed) {
  StudyPlan plan;
  plan.conditions = std::move(conditions);
  plan.estimator = est;
  plan.dgp_kinds = std::move(dgp);
  plan.assumed_kinds = std::move(assumed);
  plan.target_admissible = target;
  plan.master_seed = seed;
  return run_study(plan, g_workers).summary;
}

const SummaryRow* find(const std::vector<SummaryRow>& rows, int id, ConstructKind dgp, ConstructKind assumed) {
  for (const auto& r : rows)
    if (r.condition.id == id && r.dgp_kind == dgp && r.assumed_kind == assumed) return &r;
  return nullptr;
}

double flag_rate(const SummaryRow& r, Criterion c) { return r.flag_rate[static_cast<std::size_t>(c)]; }

std::string label(const SummaryRow& r) {
  return fmt("id%d %s/%s %s", r.condition.id, std::string(to_string(r.dgp_kind)).c_str(),
             std::string(to_string(r.assumed_kind)).c_str(), std::string(to_string(r.estimator)).c_str());
}

constexpr auto kLatent = ConstructKind::LatentVariable;
constexpr auto kComposite = ConstructKind::Composite;
constexpr auto kFormative = ConstructKind::CausalFormative;

// Shared Monte Carlo runs, computed once.
struct Runs {
  std::vector<DesignCondition> bias_cells;
  std::vector<SummaryRow> ml500, pls500, cf500;
  std::vector<DesignCondition> detect_cells;
  std::vector<SummaryRow> ml300, pls300;
};
Runs g_runs;

void prepare_bias_runs() {
  auto& r = g_runs;
  r.bias_cells = {cell(Position::Exogenous, 500, 3, 0.5, true), cell(Position::Exogenous, 500, 5, 0.3, true),
                  cell(Position::Exogenous, 500, 7, 0.1, false)};
  r.ml500 = run(r.bias_cells, Estimator::Ml, {kLatent, kComposite}, {kLatent, kComposite}, 500, 3001);
  r.pls500 = run(r.bias_cells, Estimator::Pls, {kLatent, kComposite}, {kLatent, kComposite}, 500, 3001);
  r.cf500 = run(r.bias_cells, Estimator::Ml, {kFormative}, {kFormative}, 500, 3001);
}

void prepare_detection_runs() {
  auto& r = g_runs;
  for (auto pos : {Position::Exogenous, Position::Endogenous})
    for (int k : {3, 7})
      for (double s : {0.1, 0.5}) r.detect_cells.push_back(cell(pos, 300, k, s, true));
  r.ml300 = run(r.detect_cells, Estimator::Ml, {kLatent, kComposite}, {kLatent, kComposite}, 200, 7001);
  r.pls300 = run(r.detect_cells, Estimator::Pls, {kLatent, kComposite}, {kLatent, kComposite}, 200, 7001);
}

Outcome fisher(Estimator est) {
  const verify::SuiteResult s = verify::fisher_suite(est);
  return {s.passed, fmt("%d checks, %d failures; %s", s.checks, s.failures, s.detail.c_str())};
}

Outcome correct_bias() {
  Outcome o{true, ""};
  double worst = 0.0;
  std::string worst_label;
  for (const auto* rows : {&g_runs.ml500, &g_runs.pls500})
    for (const auto& c : g_runs.bias_cells)
      for (auto kind : {kLatent, kComposite}) {
        const SummaryRow* r = find(*rows, c.id, kind, kind);
        if (r == nullptr || !r->estimable) {
          o.pass = false;
          o.detail += "missing " + std::to_string(c.id) + "; ";
          continue;
        }
        if (r->truncated) o.pass = false;
        for (const auto& p : r->paths)
          if (std::abs(p.bias) > worst) {
            worst = std::abs(p.bias);
            worst_label = label(*r);
          }
      }
  if (!(worst < 0.02)) o.pass = false;
  o.detail += fmt("max |bias| %.4f (%s) over latent and composite specs, ML and PLS", worst, worst_label.c_str());
  double cf_worst = 0.0;
  for (const auto& r : g_runs.cf500)
    for (const auto& p : r.paths) cf_worst = std::max(cf_worst, std::abs(p.bias));
  o.detail += fmt("; info: formative spec max |bias| %.4f on admissible samples", cf_worst);
  return o;
}

Outcome misspecification_bias() {
  const DesignCondition c = cell(Position::Exogenous, 500, 5, 0.3, true);
  const SummaryRow* co_on_lv = find(g_runs.ml500, c.id, kLatent, kComposite);
  const SummaryRow* lv_on_co = find(g_runs.ml500, c.id, kComposite, kLatent);
  if (co_on_lv == nullptr || lv_on_co == nullptr) return {false, "missing rows"};
  const double neg = co_on_lv->paths[0].bias, pos = lv_on_co->paths[0].bias;
  const double ratio = std::abs(pos) / std::abs(neg);
  const bool pass = neg < -0.02 && pos > 0.02 && ratio > 2.0;
  std::string detail = fmt("ML composite-on-latent %.4f, latent-on-composite %+.4f, ratio %.2f", neg, pos, ratio);
  const FisherOutcome pop_neg = fisher_check(c, kLatent, kComposite, Estimator::Ml);
  const FisherOutcome pop_pos = fisher_check(c, kComposite, kLatent, Estimator::Ml);
  const double pop_a = pop_neg.paths[0] - study::kStdPaths[0], pop_b = pop_pos.paths[0] - study::kStdPaths[0];
  detail += fmt("; info population %.4f / %+.4f, ratio %.2f", pop_a, pop_b, std::abs(pop_b) / std::abs(pop_a));
  const SummaryRow* pls_co_on_lv = find(g_runs.pls500, c.id, kLatent, kComposite);
  const SummaryRow* pls_lv_on_co = find(g_runs.pls500, c.id, kComposite, kLatent);
  if (pls_co_on_lv != nullptr && pls_lv_on_co != nullptr)
    detail += fmt("; info PLS %.4f / %+.4f", pls_co_on_lv->paths[0].bias, pls_lv_on_co->paths[0].bias);
  return {pass, detail};
}

Outcome inadmissibility() {
  Outcome o{true, ""};
  for (int n : {100, 500}) {
    std::vector<DesignCondition> cs;
    for (const auto& c : design_grid())
      if (c.position == Position::Exogenous && c.n == n) cs.push_back(c);
    const auto rows = run(cs, Estimator::Ml, {kFormative}, {kFormative}, 200, 5001);
    long attempts = 0, admissible = 0;
    for (const auto& r : rows) {
      attempts += r.n_attempts;
      admissible += r.n_admissible;
    }
    const double rate = 1.0 - static_cast<double>(admissible) / static_cast<double>(attempts);
    const double lo = n == 100 ? 0.35 : 0.15, hi = n == 100 ? 0.65 : 0.45;
    if (!(rate >= lo && rate <= hi)) o.pass = false;
    o.detail += fmt("formative n=%d %.1f%% in [%.0f%%, %.0f%%]; ", n, 100 * rate, 100 * lo, 100 * hi);
  }
  std::vector<DesignCondition> cs;
  for (const auto& c : design_grid())
    if (c.position == Position::Exogenous && c.k == 3 && std::abs(c.sigma - 0.1) < 1e-9) cs.push_back(c);
  const auto rows = run(cs, Estimator::Ml, {kComposite}, {kLatent, kComposite}, 200, 5002);
  long mis_att = 0, mis_adm = 0, cor_att = 0, cor_adm = 0;
  for (const auto& c : cs) {
    const SummaryRow* mis = find(rows, c.id, kComposite, kLatent);
    const SummaryRow* cor = find(rows, c.id, kComposite, kComposite);
    if (mis == nullptr || cor == nullptr) {
      o.pass = false;
      continue;
    }
    mis_att += mis->n_attempts;
    mis_adm += mis->n_admissible;
    cor_att += cor->n_attempts;
    cor_adm += cor->n_admissible;
    o.detail += fmt("n=%d%s %.1f%%/%.1f%%; ", c.n, c.homogeneous ? "" : " het", 100 * mis->inadmissibility,
                    100 * cor->inadmissibility);
  }
  const double mis_rate = 1.0 - static_cast<double>(mis_adm) / static_cast<double>(mis_att);
  const double cor_rate = 1.0 - static_cast<double>(cor_adm) / static_cast<double>(cor_att);
  if (!(mis_rate > cor_rate)) o.pass = false;
  o.detail += fmt("K=3, sigma=0.1 latent-on-composite %.1f%% vs correct %.1f%%", 100 * mis_rate, 100 * cor_rate);
  return o;
}

Outcome chi2_calibration() {
  Outcome o{true, ""};
  double flagged = 0.0, total = 0.0;
  std::string cells;
  for (const auto& c : g_runs.bias_cells)
    for (auto kind : {kLatent, kComposite}) {
      const SummaryRow* r = find(g_runs.ml500, c.id, kind, kind);
      if (r == nullptr) continue;
      const double rate = flag_rate(*r, Criterion::Chi2);
      flagged += rate * r->n_admissible;
      total += r->n_admissible;
      cells += fmt(" %.3f", rate);
    }
  const double pooled = total > 0 ? flagged / total : kNaN;
  if (!(std::abs(pooled - 0.05) <= 0.03)) o.pass = false;
  o.detail += fmt("ML correct specs n=500 pooled rejection %.3f (cells%s)", pooled, cells.c_str());
  double pls_min = 1.0;
  for (const auto& c : g_runs.detect_cells) {
    const SummaryRow* r = find(g_runs.pls300, c.id, kComposite, kComposite);
    if (r == nullptr) continue;
    pls_min = std::min(pls_min, flag_rate(*r, Criterion::Chi2));
  }
  if (!(pls_min > 0.95)) o.pass = false;
  o.detail += fmt("; PLS composite n=300 min chi2 flag rate %.3f", pls_min);
  return o;
}

Outcome detection_failure() {
  Outcome o{true, ""};
  for (const auto* rows : {&g_runs.ml300, &g_runs.pls300}) {
    double worst = 0.0;
    std::string worst_label;
    int compared = 0, over = 0;
    for (const auto& c : g_runs.detect_cells)
      for (auto assumed : {kLatent, kComposite}) {
        const ConstructKind other = assumed == kLatent ? kComposite : kLatent;
        const SummaryRow* cor = find(*rows, c.id, assumed, assumed);
        const SummaryRow* mis = find(*rows, c.id, other, assumed);
        if (cor == nullptr || mis == nullptr) continue;
        for (auto crit : kCriteria) {
          if (assumed == kLatent && crit == Criterion::Chi2) continue;
          const double a = flag_rate(*cor, crit), b = flag_rate(*mis, crit);
          if (std::isnan(a) || std::isnan(b)) continue;
          ++compared;
          const double sep = std::abs(b - a);
          if (sep > 0.20) {
            o.pass = false;
            ++over;
          }
          if (sep > worst) {
            worst = sep;
            worst_label = label(*mis) + " " + std::string(to_string(crit));
          }
        }
      }
    o.detail += fmt("%s: %d comparisons, %d above 20pp, max %.1fpp (%s); ",
                    std::string(to_string(rows->front().estimator)).c_str(), compared, over, 100 * worst,
                    worst_label.c_str());
  }
  return o;
}

Outcome analytic_audits() {
  const auto start = Clock::now();
  std::vector<verify::SuiteResult> suites{verify::gradient_suite(1e-5), verify::sigma0_suite(),
                                          verify::hospec_suite(),       verify::df_suite(),
                                          verify::cr_ave_suite(),       verify::fit_flag_suite(Thresholds{}),
                                          verify::determinism_suite()};
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  Outcome o{secs < 30.0, ""};
  for (const auto& s : suites) {
    if (!s.passed) o.pass = false;
    o.detail += fmt("%s %s; ", s.name.c_str(), s.passed ? "ok" : s.detail.c_str());
  }
  o.detail += fmt("%.1f s", secs);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  app.add_option("--workers", g_workers, "Worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  struct Item {
    int id;
    const char* name;
    std::function<Outcome()> check;
    double budget;
  };
  const std::vector<Item> items{
      {1, "ML Fisher consistency", [] { return fisher(Estimator::Ml); }, 120.0},
      {2, "PLS Fisher consistency", [] { return fisher(Estimator::Pls); }, 60.0},
      {3, "correct-specification bias",
       [] {
         prepare_bias_runs();
         return correct_bias();
       },
       0.0},
      {4, "misspecification bias signs and ordering", misspecification_bias, 0.0},
      {5, "inadmissibility trends", inadmissibility, 0.0},
      {6, "chi-square calibration",
       [] {
         prepare_detection_runs();
         return chi2_calibration();
       },
       0.0},
      {7, "detection failure", detection_failure, 0.0},
      {8, "analytic audits", analytic_audits, 30.0},
  };

  int failed = 0;
  for (const auto& item : items) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = item.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (item.budget > 0.0 && secs > item.budget) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s budget", item.budget);
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", item.id, item.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(items.size()) - failed, items.size());
  return failed == 0 ? 0 : 1;
}
