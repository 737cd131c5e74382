#include "icmsim/dgp.hpp"

#include "icmsim/linalg.hpp"

#include <cmath>
#include <random>

namespace icmsim {

namespace {

constexpr std::array<int, 3> kSampleSizes{100, 300, 500};
constexpr std::array<int, 3> kIndicatorCounts{3, 5, 7};
constexpr std::array<double, 3> kSigmas{0.1, 0.3, 0.5};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// New construct scale eta_new = s * eta_old.
void rescale_construct(ParamTableD& t, Index c, double s) {
  t.lambda.col(c) /= s;
  t.beta.row(c) *= s;
  t.beta.col(c) /= s;
  t.psi.row(c) *= s;
  t.psi.col(c) *= s;
}

void apply_scaling(const Model& model, ParamTableD& t) {
  for (const auto& decl : model.augmented.constructs) {
    if (!model.spec.find(decl.name)) continue;
    const Index c = t.construct_index(decl.name);
    for (const auto& k : scaling_constraints(model.spec, decl.name)) {
      double s = 1.0;
      if (k.matrix == MatrixId::Lambda)
        s = t.lambda(t.indicator_index(k.row), c) / k.value;
      else if (k.matrix == MatrixId::Gamma)
        s = k.value / t.beta(c, t.construct_index(perfect_latent_name(k.col)));
      if (s != 1.0) rescale_construct(t, c, s);
    }
  }
}

void check_fixed_cells(const ParamTableD& pattern, const ParamTableD& t) {
  auto check = [&](MatrixId id) {
    const MatrixXd& a = pattern.matrix(id);
    const MatrixXd& b = t.matrix(id);
    for (Index r = 0; r < a.rows(); ++r)
      for (Index c = 0; c < a.cols(); ++c)
        if (!pattern.is_free(id, r, c) && std::abs(a(r, c) - b(r, c)) > 1e-12)
          throw std::logic_error("population value violates a fixed cell of " +
                                 std::string(to_string(id)));
  };
  check(MatrixId::Lambda);
  check(MatrixId::Beta);
  check(MatrixId::Psi);
  check(MatrixId::Theta);
}

MatrixXd normals(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> dist(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

MatrixXd cholesky_factor(const MatrixXd& s) {
  Eigen::LLT<MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) throw NumericError("recipe covariance is not positive definite");
  return llt.matrixL();
}

}  // namespace

std::vector<DesignCondition> design_grid() {
  std::vector<DesignCondition> grid;
  for (Position pos : {Position::Exogenous, Position::Endogenous})
    for (int n : kSampleSizes)
      for (int k : kIndicatorCounts)
        for (double sigma : kSigmas)
          for (bool hom : {true, false})
            grid.push_back({static_cast<int>(grid.size()), pos, n, k, sigma, hom});
  return grid;
}

void validate_condition(const DesignCondition& condition, ConstructKind dgp_kind) {
  if (condition.position == Position::Endogenous && dgp_kind == ConstructKind::CausalFormative)
    throw std::invalid_argument("an endogenous causal-formative DGP is excluded from the design");
  if (condition.k < 1) throw std::invalid_argument("eta* needs at least one indicator");
  if (condition.n < 2) throw std::invalid_argument("sample size must be at least 2");
  if (!(condition.sigma > -1.0 && condition.sigma < 1.0))
    throw std::invalid_argument("sigma must lie in (-1, 1)");
}

MatrixXd indicator_correlations(int k, double sigma, bool homogeneous) {
  if (k < 1) throw std::invalid_argument("K must be positive");
  MatrixXd r = MatrixXd::Identity(k, k);
  const int pairs = k * (k - 1) / 2;
  if (!homogeneous) {
    if (pairs < 2) throw std::invalid_argument("heterogeneous correlations need at least two pairs");
    if (!(sigma - 0.1 > -1.0 && sigma + 0.1 < 1.0))
      throw std::invalid_argument("heterogeneous correlations leave (-1, 1)");
  }
  int idx = 0;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j, ++idx) {
      const double v = homogeneous ? sigma : sigma - 0.1 + 0.2 * idx / (pairs - 1);
      r(i, j) = r(j, i) = v;
    }
  if (!is_positive_definite(r)) throw NumericError("indicator correlation matrix is not positive definite");
  return r;
}

VectorXd composite_weights(const MatrixXd& sxx) {
  const double total = sxx.sum();
  if (!(total > 0.0)) throw NumericError("1' Sxx 1 must be positive");
  return VectorXd::Constant(sxx.rows(), 1.0 / std::sqrt(total));
}

VectorXd eta_star_loadings(const MatrixXd& sxx, const VectorXd& w) { return sxx * w; }

PopulationModel build_population(const DesignCondition& condition, ConstructKind dgp_kind,
                                 const PopulationOptions& options) {
  validate_condition(condition, dgp_kind);
  PopulationModel pop;
  pop.condition = condition;
  pop.dgp_kind = dgp_kind;
  pop.std_paths0 = options.std_paths;

  const Index k = condition.k;
  const bool exo = condition.position == Position::Exogenous;
  const MatrixXd r = indicator_correlations(condition.k, condition.sigma, condition.homogeneous);
  pop.w = composite_weights(r);
  pop.lambda_star = eta_star_loadings(r, pop.w);
  const VectorXd& lam = pop.lambda_star;
  if (dgp_kind == ConstructKind::LatentVariable) {
    pop.sxx = lam * lam.transpose();
    pop.sxx.diagonal().setOnes();
  } else {
    pop.sxx = r;
  }

  const Eigen::Vector3d c(options.std_paths[0], options.std_paths[1], options.std_paths[2]);
  MatrixXd& cc = pop.construct_cov;
  cc = MatrixXd::Identity(4, 4);
  double disturbance = 0.0;  // endogenous: Var(zeta*)
  if (exo) {
    pop.star_variance = dgp_kind == ConstructKind::CausalFormative ? 1.0 + study::kFormativeDisturbance : 1.0;
    pop.paths = c / std::sqrt(pop.star_variance);
    pop.phi = MatrixXd::Identity(3, 3);
    for (int j = 0; j < 3; ++j) {
      if (!(1.0 - c(j) * c(j) > 0.0)) throw NumericError("standardized path must lie in (-1, 1)");
      cc(0, j + 1) = cc(j + 1, 0) = c(j) * std::sqrt(pop.star_variance);
      for (int l = 0; l < j; ++l) cc(j + 1, l + 1) = cc(l + 1, j + 1) = c(j) * c(l);
    }
    cc(0, 0) = pop.star_variance;
  } else {
    pop.phi = options.endogenous_phi.value_or(MatrixXd::Identity(3, 3));
    if (pop.phi.rows() != 3 || pop.phi.cols() != 3 || !is_positive_definite(pop.phi) ||
        (pop.phi.diagonal().array() - 1.0).abs().maxCoeff() > 1e-12)
      throw std::invalid_argument("endogenous Phi must be a 3 x 3 correlation matrix");
    pop.paths = c;
    disturbance = 1.0 - c.dot(pop.phi * c);
    if (!(disturbance > 0.0)) throw NumericError("paths explain all variance of eta*");
    const VectorXd cov = pop.phi * c;
    cc.bottomRightCorner(3, 3) = pop.phi;
    for (int j = 0; j < 3; ++j) cc(0, j + 1) = cc(j + 1, 0) = cov(j);
  }

  // Indicator covariance, block by block.
  const Index p = k + 3 * study::kFixedBlockSize;
  const double l = study::kFixedLoading;
  MatrixXd& s0 = pop.sigma0;
  s0 = MatrixXd::Zero(p, p);
  s0.topLeftCorner(k, k) = pop.sxx;
  for (int a = 0; a < 3; ++a) {
    const Index ra = k + a * study::kFixedBlockSize;
    for (int b = 0; b < 3; ++b) {
      const Index rb = k + b * study::kFixedBlockSize;
      s0.block(ra, rb, study::kFixedBlockSize, study::kFixedBlockSize).setConstant(l * l * cc(a + 1, b + 1));
    }
    s0.block(ra, ra, study::kFixedBlockSize, study::kFixedBlockSize).diagonal().array() +=
        study::kFixedErrorVariance;
    const VectorXd cross = lam * (l * cc(0, a + 1) / cc(0, 0));
    for (Index i = 0; i < study::kFixedBlockSize; ++i) {
      s0.block(0, ra + i, k, 1) = cross;
      s0.block(ra + i, 0, 1, k) = cross.transpose();
    }
  }
  if (!(min_eigenvalue(s0) > 1e-10)) throw NumericError("population covariance is not positive definite");

  // True parameter table of the correctly specified model, natural metric first.
  pop.model = compile(study::assumed_model(condition.position, dgp_kind, condition.k, options.scaling));
  ParamTableD t = pop.model.table;
  t.lambda.setZero();
  t.beta.setZero();
  t.psi.setZero();
  t.theta.setZero();
  const Index star = t.construct_index(study::kEtaStar);
  for (int j = 1; j <= 3; ++j) {
    const Index e = t.construct_index(study::eta_name(j));
    for (int i = 1; i <= study::kFixedBlockSize; ++i) {
      const Index x = t.indicator_index(study::fixed_indicator(j, i));
      t.lambda(x, e) = l;
      t.theta(x, x) = study::kFixedErrorVariance;
    }
    if (exo) {
      t.beta(e, star) = pop.paths(j - 1);
      t.psi(e, e) = 1.0 - c(j - 1) * c(j - 1);
    } else {
      t.beta(star, e) = pop.paths(j - 1);
      for (int m = 1; m <= 3; ++m) t.psi(e, t.construct_index(study::eta_name(m))) = pop.phi(j - 1, m - 1);
    }
  }
  std::vector<Index> xs;
  for (int i = 1; i <= condition.k; ++i) xs.push_back(t.indicator_index(study::star_indicator(i)));
  switch (dgp_kind) {
    case ConstructKind::LatentVariable:
      for (Index i = 0; i < k; ++i) {
        t.lambda(xs[i], star) = lam(i);
        t.theta(xs[i], xs[i]) = 1.0 - lam(i) * lam(i);
      }
      t.psi(star, star) = exo ? 1.0 : disturbance;
      break;
    case ConstructKind::Composite: {
      const HospecValues hv = hospec_values(r, pop.w);
      for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < k; ++j) t.lambda(xs[i], star + j) = hv.lambda(i, j);
      t.psi.block(star, star, k, k) = hv.psi;
      t.psi(star, star) = exo ? 1.0 : disturbance;
      break;
    }
    case ConstructKind::CausalFormative:
      for (Index i = 0; i < k; ++i) {
        const Index xi = t.construct_index(perfect_latent_name(study::star_indicator(static_cast<int>(i) + 1)));
        t.lambda(xs[i], xi) = 1.0;
        t.beta(star, xi) = pop.w(i);
        for (Index j = 0; j < k; ++j)
          t.psi(xi, t.construct_index(perfect_latent_name(study::star_indicator(static_cast<int>(j) + 1)))) = r(i, j);
      }
      t.psi(star, star) = study::kFormativeDisturbance;
      break;
  }
  apply_scaling(pop.model, t);
  check_fixed_cells(pop.model.table, t);
  pop.theta0 = std::move(t);
  return pop;
}

nlohmann::json to_json(const PopulationModel& pop) {
  auto rows = [](const MatrixXd& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Index r = 0; r < m.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      out.push_back(row);
    }
    return out;
  };
  const auto& cond = pop.condition;
  nlohmann::json sigma = nlohmann::json::array();
  for (Index r = 0; r < pop.sigma0.rows(); ++r)
    for (Index c = 0; c < pop.sigma0.cols(); ++c) sigma.push_back(pop.sigma0(r, c));
  return {
      {"condition",
       {{"id", cond.id},
        {"position", std::string(to_string(cond.position))},
        {"n", cond.n},
        {"K", cond.k},
        {"sigma", cond.sigma},
        {"homogeneous", cond.homogeneous}}},
      {"dgp_kind", std::string(to_string(pop.dgp_kind))},
      {"indicators", pop.theta0.indicators},
      {"Sigma0", sigma},
      {"theta0",
       {{"constructs", pop.theta0.constructs},
        {"Lambda", rows(pop.theta0.lambda)},
        {"B", rows(pop.theta0.beta)},
        {"Psi", rows(pop.theta0.psi)},
        {"Theta", rows(pop.theta0.theta)}}},
      {"std_paths0", pop.std_paths0},
  };
}

std::uint64_t derive_seed(std::uint64_t master_seed, int condition_id, ConstructKind dgp_kind,
                          std::uint64_t rep) {
  std::uint64_t h = splitmix64(master_seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(condition_id));
  h = splitmix64(h ^ static_cast<std::uint64_t>(dgp_kind));
  return splitmix64(h ^ rep);
}

SampleDraw draw_sample_with_constructs(const PopulationModel& pop, Index n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("sample size must be at least 2");
  std::mt19937_64 rng(seed);
  const Index k = pop.condition.k;
  const VectorXd& lam = pop.lambda_star;
  const bool exo = pop.condition.position == Position::Exogenous;
  const Eigen::Vector3d c(pop.std_paths0[0], pop.std_paths0[1], pop.std_paths0[2]);

  SampleDraw out;
  MatrixXd& eta = out.constructs;
  eta.resize(n, 4);
  MatrixXd xs(n, k);
  auto reflective = [&](const VectorXd& star) {
    const VectorXd err_sd = (1.0 - lam.array().square()).sqrt();
    return MatrixXd(star * lam.transpose() + normals(rng, n, k) * err_sd.asDiagonal());
  };

  if (exo) {
    switch (pop.dgp_kind) {
      case ConstructKind::LatentVariable:
        eta.col(0) = normals(rng, n, 1);
        xs = reflective(eta.col(0));
        break;
      case ConstructKind::Composite:
        xs = normals(rng, n, k) * cholesky_factor(pop.sxx).transpose();
        eta.col(0) = xs * pop.w;
        break;
      case ConstructKind::CausalFormative:
        xs = normals(rng, n, k) * cholesky_factor(pop.sxx).transpose();
        eta.col(0) = xs * pop.w + std::sqrt(study::kFormativeDisturbance) * normals(rng, n, 1);
        break;
    }
    const MatrixXd zeta = normals(rng, n, 3);
    for (int j = 0; j < 3; ++j)
      eta.col(j + 1) = pop.paths(j) * eta.col(0) + std::sqrt(1.0 - c(j) * c(j)) * zeta.col(j);
  } else {
    eta.rightCols(3) = normals(rng, n, 3) * cholesky_factor(pop.phi).transpose();
    const double disturbance = 1.0 - c.dot(pop.phi * c);
    eta.col(0) = eta.rightCols(3) * pop.paths + std::sqrt(disturbance) * normals(rng, n, 1);
    if (pop.dgp_kind == ConstructKind::LatentVariable) {
      xs = reflective(eta.col(0));
    } else {
      const MatrixXd z = normals(rng, n, k) * cholesky_factor(pop.sxx).transpose();
      const MatrixXd proj = MatrixXd::Identity(k, k) - lam * pop.w.transpose();
      xs = eta.col(0) * lam.transpose() + z * proj.transpose();
    }
  }

  const Index b = study::kFixedBlockSize;
  out.x.resize(n, k + 3 * b);
  out.x.leftCols(k) = xs;
  const double err_sd = std::sqrt(study::kFixedErrorVariance);
  for (int j = 0; j < 3; ++j)
    out.x.middleCols(k + j * b, b) = study::kFixedLoading * eta.col(j + 1) * Eigen::RowVectorXd::Ones(b) +
                                     err_sd * normals(rng, n, b);
  return out;
}

MatrixXd draw_sample(const PopulationModel& pop, Index n, std::uint64_t seed) {
  return draw_sample_with_constructs(pop, n, seed).x;
}

MatrixXd normalize_to_population(const MatrixXd& sample, const MatrixXd& sigma0) {
  if (sample.cols() != sigma0.rows()) throw std::invalid_argument("sample and Sigma0 dimensions differ");
  const MatrixXd s = sample_covariance(sample);
  const MatrixXd map = symmetric_inverse_sqrt(s) * symmetric_sqrt(sigma0);
  return centered(sample) * map;
}

}  // namespace icmsim
