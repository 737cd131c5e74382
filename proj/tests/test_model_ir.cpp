#include "helpers.hpp"

#include "icmsim/implied.hpp"
#include "icmsim/linalg.hpp"
#include "icmsim/ml.hpp"
#include "icmsim/model.hpp"
#include "icmsim/study.hpp"

#include <doctest.h>

using namespace icmsim;

TEST_CASE("implied covariance of a rank-one latent block") {
  MatrixXd lambda(2, 1);
  lambda << 1, 1;
  const MatrixXd beta = MatrixXd::Zero(1, 1);
  const MatrixXd psi = MatrixXd::Identity(1, 1);
  const MatrixXd theta = MatrixXd::Zero(2, 2);
  const MatrixXd sigma = implied_covariance(lambda, beta, psi, theta);
  CHECK(sigma.isApprox(MatrixXd::Ones(2, 2)));
}

TEST_CASE("implied covariance of a fixed block of the design") {
  const MatrixXd lambda = MatrixXd::Constant(4, 1, study::kFixedLoading);
  const MatrixXd theta = MatrixXd::Identity(4, 4) * study::kFixedErrorVariance;
  const MatrixXd sigma = implied_covariance(lambda, MatrixXd::Zero(1, 1), MatrixXd::Identity(1, 1), theta);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) CHECK(sigma(i, j) == doctest::Approx(i == j ? 1.0 : 0.64).epsilon(1e-14));
}

TEST_CASE("implied covariance rejects a B that is not lower triangular") {
  Model m = compile(study::assumed_model(Position::Exogenous, ConstructKind::LatentVariable, 3));
  ParamTableD t = m.table;
  t.beta(0, 1) = 0.5;
  CHECK_THROWS_AS(implied_covariance(t), std::invalid_argument);
}

TEST_CASE("formative augmentation adds perfect single-indicator latents") {
  const ModelSpec spec = study::assumed_model(Position::Exogenous, ConstructKind::CausalFormative, 3);
  const Model m = compile(spec);
  int perfect = 0;
  for (const auto& c : m.constructs) perfect += c.role == ConstructRole::Perfect ? 1 : 0;
  CHECK(perfect == 3);

  const Index hub = m.table.construct_index(study::kEtaStar);
  int fixed_unit_loadings = 0, zero_errors = 0, free_psi = 0, gammas = 0, free_gammas = 0;
  for (int i = 1; i <= 3; ++i) {
    const Index xi = m.table.construct_index(perfect_latent_name(study::star_indicator(i)));
    const Index x = m.table.indicator_index(study::star_indicator(i));
    REQUIRE(xi >= 0);
    fixed_unit_loadings += (m.table.lambda(x, xi) == 1.0 && !m.table.is_free(MatrixId::Lambda, x, xi)) ? 1 : 0;
    zero_errors += (m.table.theta(x, x) == 0.0 && !m.table.is_free(MatrixId::Theta, x, x)) ? 1 : 0;
    gammas += m.table.beta(hub, xi) != 0.0 || m.table.is_free(MatrixId::Beta, hub, xi) ? 1 : 0;
    free_gammas += m.table.is_free(MatrixId::Beta, hub, xi) ? 1 : 0;
    for (int j = 1; j <= i; ++j) {
      const Index xj = m.table.construct_index(perfect_latent_name(study::star_indicator(j)));
      free_psi += m.table.is_free(MatrixId::Psi, xi, xj) ? 1 : 0;
    }
  }
  CHECK(fixed_unit_loadings == 3);
  CHECK(zero_errors == 3);
  CHECK(free_psi == 6);
  CHECK(gammas == 3);
  CHECK(free_gammas == 2);
  CHECK(m.table.is_free(MatrixId::Psi, hub, hub));
}

TEST_CASE("augmentation leaves specs without formative constructs unchanged") {
  const ModelSpec spec = study::assumed_model(Position::Exogenous, ConstructKind::LatentVariable, 5);
  CHECK(augment_causal_formative(spec) == spec);
}

TEST_CASE("degrees of freedom") {
  SUBCASE("single latent with four indicators") { CHECK(degrees_of_freedom(testing::single_latent(4)) == 2); }
  SUBCASE("saturated single latent with three indicators") {
    CHECK(degrees_of_freedom(testing::single_latent(3)) == 0);
  }
  SUBCASE("over-parameterized model throws") {
    CHECK_THROWS_AS(degrees_of_freedom(testing::single_latent(2)), SpecError);
  }
  SUBCASE("exogenous formative model, K=5") {
    const Model m = compile(study::assumed_model(Position::Exogenous, ConstructKind::CausalFormative, 5));
    const Index downstream = 3 * 7 + 3 + 3;
    CHECK(m.q() == 15 + 4 + 1 + downstream);
    CHECK(degrees_of_freedom(m) == vech_size(17) - m.q());
  }
  SUBCASE("exogenous latent model, K=3") {
    const Model m = compile(study::assumed_model(Position::Exogenous, ConstructKind::LatentVariable, 3));
    CHECK(m.p() == 15);
    CHECK(degrees_of_freedom(m) == 120 - (3 * 7 + 3 + 3 + 6));
  }
}

TEST_CASE("emitted-path rule") {
  SUBCASE("isolated formative construct violates the rule") {
    ModelSpec spec;
    spec.constructs.push_back({"f", ConstructKind::CausalFormative, true});
    spec.indicators["f"] = {"a", "b", "c"};
    spec.constraints.push_back({MatrixId::Gamma, "f", "a", 1.0});
    CHECK(check_emitted_paths(spec) == std::vector<std::string>{"f"});
  }
  SUBCASE("exogenous formative construct with three outgoing paths passes") {
    CHECK(check_emitted_paths(study::assumed_model(Position::Exogenous, ConstructKind::CausalFormative, 3)).empty());
  }
  SUBCASE("endogenous formative construct without outgoing paths violates the rule") {
    ModelSpec spec = study::assumed_model(Position::Endogenous, ConstructKind::LatentVariable, 3);
    spec.constructs[0].kind = ConstructKind::CausalFormative;
    std::erase_if(spec.constraints, [](const Constraint& c) { return c.col == study::kEtaStar || c.row == study::kEtaStar; });
    spec.constraints.push_back({MatrixId::Gamma, study::kEtaStar, study::star_indicator(1), 1.0});
    CHECK(check_emitted_paths(spec) == std::vector<std::string>{study::kEtaStar});
  }
  SUBCASE("endogenous formative assumed model is excluded") {
    CHECK_THROWS_AS(study::assumed_model(Position::Endogenous, ConstructKind::CausalFormative, 3),
                    std::invalid_argument);
  }
}

TEST_CASE("standardization") {
  ParamTableD t;
  t.constructs = {"eta_star", "eta1"};
  t.indicators = {"a", "b"};
  t.lambda = MatrixXd::Identity(2, 2);
  t.theta = MatrixXd::Zero(2, 2);
  t.beta = MatrixXd::Zero(2, 2);
  t.psi = MatrixXd::Zero(2, 2);
  const double b = 0.3578;
  t.beta(1, 0) = b;
  t.psi(0, 0) = 1.25;
  t.psi(1, 1) = 1.0 - b * b * 1.25;
  CHECK(standardize(t)(1, 0) == doctest::Approx(0.4001).epsilon(1e-4));

  SUBCASE("a standardized table is unchanged") {
    ParamTableD s = t;
    s.beta(1, 0) = 0.4;
    s.psi(0, 0) = 1.0;
    s.psi(1, 1) = 0.84;
    CHECK(standardize(s)(1, 0) == doctest::Approx(0.4).epsilon(1e-14));
  }
}

TEST_CASE("standardized paths do not depend on the scaling choice") {
  const DesignCondition c = testing::find_condition(Position::Exogenous, 100, 5, 0.3, false);
  const PopulationModel pop = build_population(c, ConstructKind::LatentVariable);
  const MatrixXd x = draw_sample(pop, 300, 7);
  const MatrixXd s = sample_covariance(x);
  const auto a = fit_ml(study::assumed_model(c.position, ConstructKind::LatentVariable, c.k), s, 300);
  const auto b = fit_ml(
      study::assumed_model(c.position, ConstructKind::LatentVariable, c.k, study::ScalingChoice::Variance), s, 300);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  for (std::size_t j = 0; j < 3; ++j) CHECK(a.std_paths[j] == doctest::Approx(b.std_paths[j]).epsilon(1e-5));
}

TEST_CASE("spec validation") {
  SUBCASE("cycle") {
    ModelSpec spec = study::assumed_model(Position::Exogenous, ConstructKind::LatentVariable, 3);
    spec.paths.push_back({"eta1", study::kEtaStar});
    CHECK_THROWS_AS(validate(spec), SpecError);
  }
  SUBCASE("duplicate construct") {
    ModelSpec spec = testing::single_latent(3);
    spec.constructs.push_back(spec.constructs[0]);
    CHECK_THROWS_AS(validate(spec), SpecError);
  }
  SUBCASE("missing scaling constraint") {
    ModelSpec spec = testing::single_latent(3);
    spec.constraints.clear();
    CHECK_THROWS_AS(validate(spec), SpecError);
  }
  SUBCASE("indicator in two blocks") {
    ModelSpec spec = study::assumed_model(Position::Exogenous, ConstructKind::LatentVariable, 3);
    spec.indicators["eta1"].push_back(study::star_indicator(1));
    CHECK_THROWS_AS(validate(spec), SpecError);
  }
}

TEST_CASE("spec JSON round trip") {
  for (auto kind : {ConstructKind::LatentVariable, ConstructKind::CausalFormative, ConstructKind::Composite}) {
    const ModelSpec spec = study::assumed_model(Position::Exogenous, kind, 5);
    CHECK(model_spec_from_json(to_json(spec)) == spec);
  }
}

TEST_CASE("kind, position and estimator names") {
  CHECK(parse_construct_kind(to_string(ConstructKind::CausalFormative)) == ConstructKind::CausalFormative);
  CHECK(parse_position("endogenous") == Position::Endogenous);
  CHECK(parse_estimator("pls") == Estimator::Pls);
  CHECK_THROWS_AS(parse_construct_kind("nonsense"), std::invalid_argument);
}
