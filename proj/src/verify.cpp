#include "icmsim/verify.hpp"

#include "icmsim/csv.hpp"
#include "icmsim/hospec.hpp"
#include "icmsim/linalg.hpp"
#include "icmsim/ml.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace icmsim::verify {

namespace {

using Clock = std::chrono::steady_clock;

class Tally {
 public:
  explicit Tally(std::string name) : start_(Clock::now()) { result_.name = std::move(name); }

  void check(bool ok, const std::string& what) {
    ++result_.checks;
    if (ok) return;
    if (result_.failures++ == 0) result_.detail = what;
  }

  SuiteResult done(std::string summary = {}) {
    result_.passed = result_.failures == 0 && result_.checks > 0;
    if (result_.failures == 0) result_.detail = std::move(summary);
    if (result_.checks == 0) result_.detail = "no checks ran";
    result_.seconds = std::chrono::duration<double>(Clock::now() - start_).count();
    return result_;
  }

 private:
  SuiteResult result_;
  Clock::time_point start_;
};

std::string label(Position pos, ConstructKind kind, int k) {
  return std::string(to_string(pos)) + "/" + std::string(to_string(kind)) + "/K" + std::to_string(k);
}

/// Conditions that differ in population (n does not change Sigma0).
std::vector<DesignCondition> distinct_populations() {
  std::vector<DesignCondition> out;
  for (const auto& c : design_grid())
    if (c.n == 100) out.push_back(c);
  return out;
}

DesignCondition reference_condition(Position pos, int k) {
  for (const auto& c : design_grid())
    if (c.position == pos && c.n == 100 && c.k == k && std::abs(c.sigma - 0.3) < 1e-9 && c.homogeneous) return c;
  throw std::logic_error("reference condition missing from the grid");
}

/// Start values moved off the symmetric points of the equal-weight design.
VectorXd generic_point(const Model& model, const MatrixXd& s) {
  VectorXd theta = ml_start_values(model, s);
  for (Index i = 0; i < theta.size(); ++i) {
    const double t = static_cast<double>(i + 1);
    theta(i) = theta(i) * (1.0 + 0.05 * std::sin(t)) + 0.01 * std::cos(2.0 * t);
  }
  return theta;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

std::string study_csv(const StudyOutput& out) {
  std::ostringstream os;
  csv::write_records(os, out.records);
  csv::write_summary(os, out.summary);
  return os.str();
}

}  // namespace

Index hand_count_free(Position position, ConstructKind kind, int k) {
  const Index kk = k;
  Index q = 3 * (3 + 4) + 3 + 3;  // fixed blocks, paths, eta_j variances or disturbances
  if (position == Position::Endogenous) q += 3;
  switch (kind) {
    case ConstructKind::LatentVariable: q += 2 * kk; break;
    case ConstructKind::CausalFormative: q += kk * (kk + 1) / 2 + kk; break;
    case ConstructKind::Composite: q += kk * (kk + 1) / 2 + kk - 1; break;
  }
  return q;
}

SuiteResult gradient_suite(double tolerance) {
  Tally t("gradient");
  double worst = 0.0;
  for (auto pos : {Position::Exogenous, Position::Endogenous})
    for (int k : {3, 5, 7}) {
      const DesignCondition cond = reference_condition(pos, k);
      for (auto kind : study::assumed_kinds(pos, Estimator::Ml)) {
        const PopulationModel pop = build_population(cond, kind);
        const Model model = compile(study::assumed_model(pos, kind, k));
        const MlObjective obj(model, pop.sigma0);
        const VectorXd theta = generic_point(model, pop.sigma0);
        VectorXd g;
        const double f = obj.value_and_gradient(theta, g);
        const VectorXd gn = obj.numeric_gradient(theta);
        const double rel = (g - gn).cwiseAbs().maxCoeff() / std::max(1.0, gn.cwiseAbs().maxCoeff());
        worst = std::max(worst, rel);
        t.check(std::isfinite(f) && rel < tolerance, label(pos, kind, k) + ": relative error " + std::to_string(rel));
      }
    }
  return t.done("max relative error " + csv::format_number(worst));
}

SuiteResult sigma0_suite() {
  Tally t("sigma0_pd");
  double worst = 0.0;
  for (const auto& c : design_grid())
    for (auto kind : study::dgp_kinds(c.position)) {
      const std::string what = "condition " + std::to_string(c.id) + " " + std::string(to_string(kind));
      try {
        const PopulationModel pop = build_population(c, kind);
        const double err = (implied_covariance(pop.theta0) - pop.sigma0).cwiseAbs().maxCoeff();
        worst = std::max(worst, err);
        t.check(is_positive_definite(pop.sigma0), what + ": Sigma0 not PD");
        t.check(err < 1e-10, what + ": theta0 does not reproduce Sigma0");
      } catch (const std::exception& e) {
        t.check(false, what + ": " + e.what());
      }
    }
  return t.done("max |Sigma(theta0) - Sigma0| " + csv::format_number(worst));
}

SuiteResult hospec_suite() {
  Tally t("hospec_saturation");
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> z;
  double worst = 0.0;
  for (Index k = 2; k <= 7; ++k)
    for (auto scaling : {CompositeScaling::Variance, CompositeScaling::FirstLoading}) {
      const HospecBlock block = build_hospec(k, scaling);
      t.check(saturation_rank(block) == vech_size(k), "K=" + std::to_string(k) + ": block not saturated");
      for (int draw = 0; draw < 5; ++draw) {
        MatrixXd a(k + 3, k);
        for (Index i = 0; i < a.size(); ++i) a(i) = z(rng);
        const MatrixXd s = a.transpose() * a / static_cast<double>(k + 2);
        VectorXd w(k);
        for (Index i = 0; i < k; ++i) w(i) = 0.5 + std::abs(z(rng));
        w /= std::sqrt(w.dot(s * w));
        const HospecValues v = hospec_values(s, w);
        const MatrixXd implied = v.lambda * v.psi * v.lambda.transpose();
        const double f = fml(s, implied);
        worst = std::max(worst, std::abs(f));
        t.check(std::abs(f) < 1e-10, "K=" + std::to_string(k) + ": F = " + std::to_string(f));
        const VectorXd back = recover_weights(v.lambda);
        t.check((back - w).cwiseAbs().maxCoeff() < 1e-8, "K=" + std::to_string(k) + ": weights not recovered");
      }
    }
  return t.done("max |F| " + csv::format_number(worst));
}

SuiteResult df_suite() {
  Tally t("df_audit");
  for (auto pos : {Position::Exogenous, Position::Endogenous})
    for (int k : {3, 5, 7})
      for (auto kind : study::assumed_kinds(pos, Estimator::Ml)) {
        const Model model = compile(study::assumed_model(pos, kind, k));
        const Index p = 3 * study::kFixedBlockSize + k;
        const Index expected = vech_size(p) - hand_count_free(pos, kind, k);
        t.check(degrees_of_freedom(model) == expected,
                label(pos, kind, k) + ": df " + std::to_string(degrees_of_freedom(model)) + " vs hand count " +
                    std::to_string(expected));
        const PopulationModel pop = build_population(reference_condition(pos, k), kind);
        const VectorXd theta = fit_ml(model, pop.sigma0, 10000, MlOptions{{}, false}).table.values();
        t.check(jacobian_rank(model, theta) == model.q(), label(pos, kind, k) + ": rank-deficient Jacobian");
      }
  return t.done();
}

SuiteResult cr_ave_suite() {
  Tally t("cr_ave");
  const VectorXd l = VectorXd::Constant(study::kFixedBlockSize, study::kFixedLoading);
  const VectorXd e = VectorXd::Constant(study::kFixedBlockSize, study::kFixedErrorVariance);
  const CrAve v = cr_ave(l, e);
  t.check(std::abs(v.cr - 0.87671) < 5e-6, "CR " + csv::format_number(v.cr));
  t.check(std::abs(v.ave - 0.64) < 1e-12, "AVE " + csv::format_number(v.ave));
  return t.done("CR " + csv::format_number(v.cr) + ", AVE " + csv::format_number(v.ave));
}

SuiteResult fit_flag_suite(const Thresholds& thresholds) {
  Tally t("fit_flags");
  struct Case {
    double p, srmr, cfi, rmsea, cr, ave;
    Index df;
    std::array<std::optional<bool>, 6> expected;
  };
  const std::vector<Case> cases{
      {0.04, 0.09, 0.94, 0.06, 0.69, 0.49, 10, {true, true, true, true, true, true}},
      {0.06, 0.07, 0.96, 0.04, 0.71, 0.51, 10, {false, false, false, false, false, false}},
      {0.049, 0.081, 0.949, 0.051, 0.699, 0.499, 10, {true, true, true, true, true, true}},
      {0.051, 0.079, 0.951, 0.049, 0.701, 0.501, 10, {false, false, false, false, false, false}},
      {std::nan(""), 0.02, std::nan(""), std::nan(""), 0.9, 0.6, 0, {std::nullopt, false, std::nullopt, std::nullopt,
                                                                      false, false}},
      {0.5, 0.03, 0.99, 0.01, std::nan(""), std::nan(""), 10, {false, false, false, false, std::nullopt,
                                                               std::nullopt}},
  };
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const Case& c = cases[i];
    FitReport r;
    r.df = c.df;
    r.p_value = c.p;
    r.srmr = c.srmr;
    r.cfi = c.cfi;
    r.rmsea = c.rmsea;
    r.cr_min = c.cr;
    r.ave_min = c.ave;
    apply_flags(r, thresholds);
    for (std::size_t k = 0; k < kCriteria.size(); ++k)
      t.check(r.flags[k] == c.expected[k],
              "case " + std::to_string(i) + ": unexpected " + std::string(to_string(kCriteria[k])) + " flag");
  }
  t.check(std::abs(chi_square_test(1.0, 11, 10).p_value - 0.440493285065212) < 1e-9, "chi-square p-value");
  return t.done();
}

SuiteResult fisher_suite(Estimator estimator) {
  Tally t(estimator == Estimator::Ml ? "fisher_ml" : "fisher_pls");
  int consistent = 0;
  for (const auto& c : distinct_populations())
    for (auto dgp : study::dgp_kinds(c.position))
      for (auto assumed : study::assumed_kinds(c.position, estimator)) {
        const FisherOutcome o = fisher_check(c, dgp, assumed, estimator);
        consistent += o.expected_consistent ? 1 : 0;
        t.check(o.pass, "condition " + std::to_string(c.id) + " dgp=" + std::string(to_string(dgp)) +
                            " assumed=" + std::string(to_string(assumed)) + ": deviation " +
                            csv::format_number(o.max_deviation) + " " + join_reasons(o.reasons));
      }
  return t.done(std::to_string(consistent) + " consistent pairs");
}

SuiteResult determinism_suite() {
  Tally t("determinism");
  StudyPlan plan;
  plan.target_admissible = 10;
  plan.master_seed = 42;
  ConditionFilter filter;
  add_filter(filter, "id=2");
  add_filter(filter, "dgp=latent,composite");
  apply_filter(plan, filter);
  for (auto est : {Estimator::Ml, Estimator::Pls}) {
    plan.estimator = est;
    const StudyOutput a = run_study(plan, 1);
    const StudyOutput b = run_study(plan, 1);
    const StudyOutput c = run_study(plan, 3);
    const std::string tag(to_string(est));
    t.check(study_csv(a) == study_csv(b), tag + ": repeated runs differ");
    t.check(study_csv(a) == study_csv(c), tag + ": output depends on the worker count");
    std::map<std::tuple<int, int, int>, std::uint64_t> hashes;
    for (const auto& r : a.records) {
      const auto key = std::make_tuple(r.condition.id, static_cast<int>(r.dgp_kind), r.rep);
      const auto [it, fresh] = hashes.emplace(key, r.sample_hash);
      t.check(fresh || it->second == r.sample_hash, tag + ": assumed models saw different samples");
    }
  }
  return t.done();
}

StudyPlan quick_plan(Estimator estimator, int reps) {
  StudyPlan plan;
  plan.estimator = estimator;
  plan.target_admissible = reps;
  plan.master_seed = 2024;
  ConditionFilter filter;
  add_filter(filter, "position=exogenous");
  add_filter(filter, "n=100");
  add_filter(filter, "K=3");
  add_filter(filter, "sigma=0.3");
  add_filter(filter, "homogeneous=true");
  add_filter(filter, "dgp=latent,composite");
  apply_filter(plan, filter);
  return plan;
}

std::vector<std::pair<std::string, std::string>> quick_hashes(int reps, int workers) {
  std::vector<std::pair<std::string, std::string>> out;
  for (auto est : {Estimator::Ml, Estimator::Pls}) {
    const StudyPlan plan = quick_plan(est, reps);
    for (const auto& cell : expand(plan)) {
      const CellOutput co = run_condition(cell, plan, workers);
      std::ostringstream os;
      csv::write_summary(os, co.summary);
      out.emplace_back(std::string(to_string(est)) + "/" + std::to_string(cell.condition.id) + "/" +
                           std::string(to_string(cell.dgp_kind)),
                       hex(fnv1a(os.str())));
    }
  }
  return out;
}

SuiteResult golden_suite(const std::filesystem::path& golden, bool update, int workers) {
  Tally t("golden_mc");
  constexpr int kReps = 200;
  const auto hashes = quick_hashes(kReps, workers);
  if (update) {
    nlohmann::json doc = {{"reps", kReps}, {"summary_hashes", nlohmann::json::object()}};
    for (const auto& [cell, h] : hashes) doc["summary_hashes"][cell] = h;
    std::ofstream f(golden);
    f << doc.dump(2) << '\n';
    t.check(static_cast<bool>(f), "cannot write " + golden.string());
    return t.done("golden file written");
  }
  std::ifstream f(golden);
  if (!f) {
    t.check(false, "golden file " + golden.string() + " missing");
    return t.done();
  }
  const nlohmann::json doc = nlohmann::json::parse(f);
  const auto& stored = doc.at("summary_hashes");
  t.check(stored.size() == hashes.size(), "golden file lists a different set of cells");
  for (const auto& [cell, h] : hashes)
    t.check(stored.contains(cell) && stored.at(cell).get<std::string>() == h, cell + ": summary hash " + h);
  return t.done(std::to_string(hashes.size()) + " cells match");
}

std::vector<SuiteResult> run_all(const Options& options) {
  std::vector<SuiteResult> out;
  out.push_back(gradient_suite());
  out.push_back(sigma0_suite());
  out.push_back(hospec_suite());
  out.push_back(df_suite());
  out.push_back(cr_ave_suite());
  out.push_back(fit_flag_suite(options.thresholds));
  out.push_back(fisher_suite(Estimator::Ml));
  out.push_back(fisher_suite(Estimator::Pls));
  out.push_back(determinism_suite());
  if (options.golden) out.push_back(golden_suite(*options.golden, options.update_golden, options.workers));
  return out;
}

}  // namespace icmsim::verify
