#include "helpers.hpp"

#include "icmsim/linalg.hpp"
#include "icmsim/ml.hpp"
#include "icmsim/optimizer.hpp"

#include <doctest.h>

using namespace icmsim;
using testing::find_condition;

namespace {

double max_path_deviation(const EstimationResult& r, const std::array<double, 3>& truth) {
  double dev = 0.0;
  for (std::size_t j = 0; j < 3; ++j) dev = std::max(dev, std::abs(r.std_paths[j] - truth[j]));
  return dev;
}

EstimationResult population_fit(const DesignCondition& c, ConstructKind dgp, ConstructKind assumed) {
  const PopulationModel pop = build_population(c, dgp);
  const MatrixXd x = normalize_to_population(draw_sample(pop, 10000, 17), pop.sigma0);
  MlOptions opt;
  opt.optimizer.gradient_tolerance = 1e-9;
  opt.optimizer.max_iterations = 2000;
  return fit_ml(study::assumed_model(c.position, assumed, c.k), sample_covariance(x), 10000, opt);
}

}  // namespace

TEST_CASE("ML discrepancy") {
  const MatrixXd s = (MatrixXd(2, 2) << 2, 0.3, 0.3, 1).finished();
  CHECK(fml(s, s) == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  CHECK(fml(MatrixXd(2.0 * MatrixXd::Identity(2, 2)), MatrixXd(MatrixXd::Identity(2, 2))) ==
        doctest::Approx(2.0 * (1.0 - std::log(2.0))).epsilon(1e-12));
  CHECK(fml(MatrixXd(2.0 * MatrixXd::Identity(2, 2)), MatrixXd(MatrixXd::Identity(2, 2))) ==
        doctest::Approx(0.61371).epsilon(1e-5));
  CHECK_THROWS_AS(fml(s, MatrixXd(MatrixXd::Ones(2, 2))), NumericError);
}

TEST_CASE("analytic gradient agrees with central differences") {
  for (auto pos : {Position::Exogenous, Position::Endogenous})
    for (auto kind : study::assumed_kinds(pos, Estimator::Ml)) {
      const DesignCondition c = find_condition(pos, 300, 5, 0.5, false);
      const PopulationModel pop = build_population(c, ConstructKind::LatentVariable);
      const MatrixXd s = sample_covariance(draw_sample(pop, 300, 4));
      const Model m = compile(study::assumed_model(pos, kind, c.k));
      const MlObjective obj(m, s);
      VectorXd theta = ml_start_values(m, s);
      for (Index i = 0; i < theta.size(); ++i) theta(i) += 0.01 * std::cos(static_cast<double>(i));
      VectorXd g;
      obj.value_and_gradient(theta, g);
      const VectorXd gn = obj.numeric_gradient(theta);
      CHECK((g - gn).cwiseAbs().maxCoeff() / std::max(1.0, gn.cwiseAbs().maxCoeff()) < 1e-5);
    }
}

TEST_CASE("objective is infinite where the implied covariance is not PD") {
  const Model m = compile(testing::single_latent(4));
  const MlObjective obj(m, MatrixXd::Identity(4, 4));
  VectorXd theta = ml_start_values(m, MatrixXd::Identity(4, 4));
  theta.setConstant(-5.0);
  VectorXd g;
  CHECK(std::isinf(obj.value_and_gradient(theta, g)));
}

TEST_CASE("quasi-Newton minimizer") {
  auto rosenbrock = [](const VectorXd& x, VectorXd& g) {
    const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
    g.resize(2);
    g(0) = -2.0 * a - 400.0 * x(0) * b;
    g(1) = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  OptimizerOptions opt;
  opt.max_iterations = 1000;
  const OptimizerResult r = minimize_bfgs(rosenbrock, (VectorXd(2) << -1.2, 1.0).finished(), opt);
  CHECK(r.converged);
  CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(r.x(1) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("correctly specified population fits recover the paths") {
  for (auto pos : {Position::Exogenous, Position::Endogenous})
    for (int k : {3, 7})
      for (double sigma : {0.1, 0.5})
        for (auto kind : study::dgp_kinds(pos)) {
          const DesignCondition c = find_condition(pos, 100, k, sigma, sigma > 0.3);
          CAPTURE(c.id);
          CAPTURE(to_string(kind));
          const EstimationResult r = population_fit(c, kind, kind);
          CHECK(r.f_min < 1e-10);
          CHECK(r.admissible());
          CHECK(max_path_deviation(r, study::kStdPaths) < 1e-6);
        }
}

TEST_CASE("formative model is consistent for exogenous latent and composite populations") {
  for (auto dgp : {ConstructKind::LatentVariable, ConstructKind::Composite}) {
    const DesignCondition c = find_condition(Position::Exogenous, 100, 5, 0.3, false);
    const EstimationResult r = population_fit(c, dgp, ConstructKind::CausalFormative);
    CHECK(max_path_deviation(r, study::kStdPaths) < 1e-6);
  }
}

TEST_CASE("latent model on a composite population is inconsistent") {
  for (auto pos : {Position::Exogenous, Position::Endogenous}) {
    const DesignCondition c = find_condition(pos, 100, 3, 0.3, true);
    const EstimationResult r = population_fit(c, ConstructKind::Composite, ConstructKind::LatentVariable);
    CHECK(max_path_deviation(r, study::kStdPaths) > 0.01);
  }
}

TEST_CASE("admissibility checks") {
  const DesignCondition c = find_condition(Position::Exogenous, 100, 3, 0.3, true);
  const PopulationModel pop = build_population(c, ConstructKind::LatentVariable);
  const Model m = compile(study::assumed_model(c.position, ConstructKind::LatentVariable, c.k));
  const EstimationResult good = fit_ml(m, pop.sigma0, 500);
  REQUIRE(good.admissible());

  SUBCASE("Heywood case") {
    EstimationResult r = good;
    r.table.theta(5, 5) = -0.05;
    const auto reasons = check_admissibility(r, m);
    CHECK(std::find(reasons.begin(), reasons.end(), Reason::NonPdErrorCov) != reasons.end());
  }
  SUBCASE("NaN standard error") {
    EstimationResult r = good;
    r.se(0) = std::nan("");
    const auto reasons = check_admissibility(r, m);
    CHECK(std::find(reasons.begin(), reasons.end(), Reason::NegativeSe) != reasons.end());
  }
  SUBCASE("negative construct variance") {
    EstimationResult r = good;
    r.table.psi(0, 0) = -0.2;
    const auto reasons = check_admissibility(r, m);
    CHECK(std::find(reasons.begin(), reasons.end(), Reason::NonPdConstructCov) != reasons.end());
  }
  SUBCASE("nonconvergence") {
    EstimationResult r = good;
    r.converged = false;
    CHECK(check_admissibility(r, m).front() == Reason::Nonconvergence);
  }
  CHECK(join_reasons({Reason::Nonconvergence, Reason::NegativeSe}) == "nonconvergence|negative_se");
}

TEST_CASE("standard errors shrink with the square root of n - 1") {
  const DesignCondition c = find_condition(Position::Exogenous, 100, 3, 0.3, true);
  const PopulationModel pop = build_population(c, ConstructKind::LatentVariable);
  const Model m = compile(study::assumed_model(c.position, ConstructKind::LatentVariable, c.k));
  const EstimationResult a = fit_ml(m, pop.sigma0, 101);
  const EstimationResult b = fit_ml(m, pop.sigma0, 401);
  REQUIRE(a.se.size() == m.q());
  CHECK((a.se.array() > 0.0).all());
  CHECK((b.se * 2.0 - a.se).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("fit rejects a singular sample covariance") {
  const Model m = compile(testing::single_latent(4));
  CHECK_THROWS(fit_ml(m, MatrixXd::Ones(4, 4), 100));
}
