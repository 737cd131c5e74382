#include "icmsim/pls.hpp"

#include "icmsim/linalg.hpp"
#include "icmsim/ml.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace icmsim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kRangeSlack = 1e-8;

struct Layout {
  std::vector<std::vector<Index>> blocks;  // model-order indicator positions per construct
  std::vector<std::vector<Index>> preds;
  std::vector<std::vector<Index>> succs;
};

Layout make_layout(const ModelSpec& spec) {
  Layout lay;
  Index offset = 0;
  std::map<std::string, Index> pos;
  for (std::size_t j = 0; j < spec.constructs.size(); ++j) pos[spec.constructs[j].name] = static_cast<Index>(j);
  for (const auto& c : spec.constructs) {
    const auto& blk = spec.block(c.name);
    if (blk.empty()) throw SpecError("PLS needs an indicator block for '" + c.name + "'");
    std::vector<Index> idx;
    for (std::size_t i = 0; i < blk.size(); ++i) idx.push_back(offset++);
    lay.blocks.push_back(idx);
  }
  lay.preds.resize(spec.constructs.size());
  lay.succs.resize(spec.constructs.size());
  for (const auto& p : spec.paths) {
    lay.preds[static_cast<std::size_t>(pos[p.target])].push_back(pos[p.source]);
    lay.succs[static_cast<std::size_t>(pos[p.source])].push_back(pos[p.target]);
  }
  return lay;
}

MatrixXd sub(const MatrixXd& m, const std::vector<Index>& rows, const std::vector<Index>& cols) {
  MatrixXd out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Index>(i), static_cast<Index>(j)) = m(rows[i], cols[j]);
  return out;
}

MatrixXd proxy_correlations(const MatrixXd& r, const Layout& lay, const std::vector<VectorXd>& w) {
  const Index j_count = static_cast<Index>(w.size());
  MatrixXd c(j_count, j_count);
  for (Index a = 0; a < j_count; ++a)
    for (Index b = 0; b < j_count; ++b) {
      const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
      c(a, b) = w[ua].dot(sub(r, lay.blocks[ua], lay.blocks[ub]) * w[ub]);
    }
  return c;
}

VectorXd normalized(const VectorXd& v, const MatrixXd& rjj) {
  const double var = v.dot(rjj * v);
  if (!(var > 0.0)) throw NumericError("PLS proxy has zero variance");
  return v / std::sqrt(var);
}

MatrixXd inner_weights(const MatrixXd& c, const Layout& lay, InnerScheme scheme) {
  const Index j_count = c.rows();
  MatrixXd e = MatrixXd::Zero(j_count, j_count);
  for (Index j = 0; j < j_count; ++j) {
    const auto& preds = lay.preds[static_cast<std::size_t>(j)];
    const auto& succs = lay.succs[static_cast<std::size_t>(j)];
    if (scheme == InnerScheme::Path) {
      if (!preds.empty()) {
        const MatrixXd cpp = sub(c, preds, preds);
        const VectorXd cpt = sub(c, preds, {j});
        const VectorXd b = cpp.ldlt().solve(cpt);
        for (std::size_t k = 0; k < preds.size(); ++k) e(j, preds[k]) = b(static_cast<Index>(k));
      }
      for (Index s : succs) e(j, s) = c(j, s);
    } else {
      auto weight = [&](Index i) { return scheme == InnerScheme::Centroid ? (c(j, i) >= 0 ? 1.0 : -1.0) : c(j, i); };
      for (Index i : preds) e(j, i) = weight(i);
      for (Index i : succs) e(j, i) = weight(i);
    }
  }
  return e;
}

PlsResult finish(const ModelSpec& spec, const MatrixXd& r, const PlsConfig& config, PlsWeights weights) {
  const auto modes = resolve_modes(spec, config);
  const Layout lay = make_layout(spec);
  PlsResult out;
  out.sample_corr = r;
  out.weights = std::move(weights);
  out.correction = plsc_correct(out.weights.weights, r, spec, modes, config.plsc);
  EstimationResult& est = out.estimate;
  est.estimator = Estimator::Pls;
  est.converged = out.weights.converged;
  est.iterations = out.weights.iterations;

  const MatrixXd& cc = out.correction.construct_corr;
  try {
    est.std_paths = pls_paths(cc, spec);
  } catch (const NumericError&) {
    est.std_paths.assign(spec.paths.size(), kNaN);
  }

  // Model-implied indicator correlations.
  const Index j_count = static_cast<Index>(spec.constructs.size());
  const Index p = r.rows();
  MatrixXd loadings = MatrixXd::Zero(p, j_count);
  for (Index j = 0; j < j_count; ++j) {
    const auto& blk = lay.blocks[static_cast<std::size_t>(j)];
    for (std::size_t i = 0; i < blk.size(); ++i)
      loadings(blk[i], j) = out.correction.loadings[static_cast<std::size_t>(j)](static_cast<Index>(i));
  }
  MatrixXd beta = MatrixXd::Zero(j_count, j_count);
  MatrixXd psi = MatrixXd::Zero(j_count, j_count);
  std::map<std::string, Index> pos;
  for (Index j = 0; j < j_count; ++j) pos[spec.constructs[static_cast<std::size_t>(j)].name] = j;
  for (std::size_t k = 0; k < spec.paths.size(); ++k)
    beta(pos[spec.paths[k].target], pos[spec.paths[k].source]) = est.std_paths[k];
  for (Index a = 0; a < j_count; ++a) {
    const auto& pa = lay.preds[static_cast<std::size_t>(a)];
    if (pa.empty()) {
      for (Index b = 0; b < j_count; ++b)
        if (lay.preds[static_cast<std::size_t>(b)].empty()) psi(a, b) = cc(a, b);
    } else {
      double r2 = 0.0;
      for (Index s : pa) r2 += beta(a, s) * cc(s, a);
      psi(a, a) = 1.0 - r2;
    }
  }
  const MatrixXd inv = (MatrixXd::Identity(j_count, j_count) - beta).partialPivLu().inverse();
  const MatrixXd cimp = inv * psi * inv.transpose();
  MatrixXd sigma = loadings * cimp * loadings.transpose();
  for (Index j = 0; j < j_count; ++j) {
    const auto& blk = lay.blocks[static_cast<std::size_t>(j)];
    const VectorXd& lam = out.correction.loadings[static_cast<std::size_t>(j)];
    const bool composite = modes[static_cast<std::size_t>(j)] == PlsMode::B;
    for (std::size_t a = 0; a < blk.size(); ++a)
      for (std::size_t b = 0; b < blk.size(); ++b)
        sigma(blk[a], blk[b]) = composite ? r(blk[a], blk[b])
                                          : (a == b ? 1.0 : lam(static_cast<Index>(a)) * lam(static_cast<Index>(b)));
    if (spec.constructs[static_cast<std::size_t>(j)].kind == ConstructKind::LatentVariable) {
      est.block_loadings.push_back(lam);
      est.block_errors.push_back((1.0 - lam.array().square()).matrix());
    }
  }
  est.sigma_hat = (sigma + sigma.transpose()) / 2;
  if (est.sigma_hat.allFinite() && is_positive_definite(est.sigma_hat)) est.f_min = fml(r, est.sigma_hat);
  est.reasons = check_admissibility_pls(out);
  return out;
}

}  // namespace

std::vector<PlsMode> resolve_modes(const ModelSpec& spec, const PlsConfig& config) {
  if (!(config.tolerance > 0.0)) throw SpecError("PLS tolerance must be positive");
  if (config.max_iterations < 1) throw SpecError("PLS needs at least one iteration");
  std::vector<PlsMode> modes;
  for (const auto& c : spec.constructs) {
    if (c.kind == ConstructKind::CausalFormative)
      throw SpecError("causal-formative construct '" + c.name + "' cannot be estimated with PLS");
    PlsMode mode = c.kind == ConstructKind::Composite ? PlsMode::B : PlsMode::A;
    if (auto it = config.modes.find(c.name); it != config.modes.end()) mode = it->second;
    if (config.plsc && c.kind == ConstructKind::LatentVariable && mode != PlsMode::A)
      throw SpecError("PLSc requires mode A for latent construct '" + c.name + "'");
    modes.push_back(mode);
  }
  return modes;
}

PlsWeights pls_weights_from_correlation(const MatrixXd& r, const ModelSpec& spec, const PlsConfig& config) {
  validate(spec);
  const auto modes = resolve_modes(spec, config);
  const Layout lay = make_layout(spec);
  if (r.rows() != spec.num_indicators() || r.cols() != r.rows())
    throw std::invalid_argument("correlation matrix does not match the model's indicators");
  const std::size_t j_count = spec.constructs.size();

  std::vector<MatrixXd> rjj(j_count);
  std::vector<Eigen::LLT<MatrixXd>> solvers(j_count);
  std::vector<VectorXd> w(j_count);
  for (std::size_t j = 0; j < j_count; ++j) {
    rjj[j] = sub(r, lay.blocks[j], lay.blocks[j]);
    if (modes[j] == PlsMode::B) {
      solvers[j].compute(rjj[j]);
      if (solvers[j].info() != Eigen::Success) throw NumericError("singular indicator block in mode B");
    }
    w[j] = normalized(VectorXd::Ones(static_cast<Index>(lay.blocks[j].size())), rjj[j]);
  }

  PlsWeights out;
  for (out.iterations = 1; out.iterations <= config.max_iterations; ++out.iterations) {
    const MatrixXd c = proxy_correlations(r, lay, w);
    const MatrixXd e = inner_weights(c, lay, config.scheme);
    std::vector<VectorXd> next(j_count);
    double change = 0.0;
    for (std::size_t j = 0; j < j_count; ++j) {
      VectorXd v = VectorXd::Zero(static_cast<Index>(lay.blocks[j].size()));
      for (std::size_t i = 0; i < j_count; ++i) {
        const double eji = e(static_cast<Index>(j), static_cast<Index>(i));
        if (eji != 0.0) v += eji * sub(r, lay.blocks[j], lay.blocks[i]) * w[i];
      }
      if (modes[j] == PlsMode::B) v = solvers[j].solve(v);
      next[j] = normalized(v, rjj[j]);
      change = std::max(change, (next[j] - w[j]).cwiseAbs().maxCoeff());
    }
    w = std::move(next);
    if (change < config.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.iterations = std::min(out.iterations, config.max_iterations);
  out.weights = std::move(w);
  return out;
}

PlsWeights pls_weights(const MatrixXd& data, const ModelSpec& spec, const PlsConfig& config) {
  const MatrixXd xc = centered(data);
  const VectorXd sd = (xc.colwise().squaredNorm() / static_cast<double>(data.rows() - 1)).cwiseSqrt();
  const MatrixXd z = xc * sd.cwiseInverse().asDiagonal();
  PlsWeights out = pls_weights_from_correlation(sample_covariance(z), spec, config);
  const Layout lay = make_layout(spec);
  out.scores.resize(data.rows(), static_cast<Index>(out.weights.size()));
  for (std::size_t j = 0; j < out.weights.size(); ++j) {
    VectorXd score = VectorXd::Zero(data.rows());
    for (std::size_t i = 0; i < lay.blocks[j].size(); ++i)
      score += out.weights[j](static_cast<Index>(i)) * z.col(lay.blocks[j][i]);
    out.scores.col(static_cast<Index>(j)) = score;
  }
  return out;
}

PlscCorrection plsc_correct(const std::vector<VectorXd>& weights, const MatrixXd& r, const ModelSpec& spec,
                            const std::vector<PlsMode>& modes, bool correct) {
  const Layout lay = make_layout(spec);
  const std::size_t j_count = weights.size();
  PlscCorrection out;
  out.reliabilities = VectorXd::Ones(static_cast<Index>(j_count));
  for (std::size_t j = 0; j < j_count; ++j) {
    const VectorXd& w = weights[j];
    const MatrixXd rjj = sub(r, lay.blocks[j], lay.blocks[j]);
    if (!correct || modes[j] == PlsMode::B || w.size() < 2) {
      out.loadings.push_back(rjj * w);
      continue;
    }
    MatrixXd off = rjj;
    off.diagonal().setZero();
    const double wtw = w.squaredNorm();
    const double num = w.dot(off * w);
    const double den = wtw * wtw - w.array().pow(4).sum();
    const double c2 = num / den;
    out.reliabilities(static_cast<Index>(j)) = wtw * wtw * c2;
    out.loadings.push_back(c2 > 0.0 ? VectorXd(std::sqrt(c2) * w) : VectorXd::Constant(w.size(), kNaN));
  }
  out.construct_corr = proxy_correlations(r, lay, weights);
  const VectorXd& rho = out.reliabilities;
  for (Index a = 0; a < out.construct_corr.rows(); ++a)
    for (Index b = 0; b < out.construct_corr.cols(); ++b) {
      if (a == b) {
        out.construct_corr(a, b) = 1.0;
        continue;
      }
      const double denom = rho(a) * rho(b);
      out.construct_corr(a, b) = denom > 0.0 ? out.construct_corr(a, b) / std::sqrt(denom) : kNaN;
    }
  return out;
}

std::vector<double> pls_paths(const MatrixXd& construct_corr, const ModelSpec& spec) {
  const Layout lay = make_layout(spec);
  std::map<std::string, Index> pos;
  for (std::size_t j = 0; j < spec.constructs.size(); ++j) pos[spec.constructs[j].name] = static_cast<Index>(j);
  if (!construct_corr.allFinite()) throw NumericError("construct correlations are not finite");
  MatrixXd beta = MatrixXd::Zero(construct_corr.rows(), construct_corr.cols());
  for (std::size_t t = 0; t < lay.preds.size(); ++t) {
    const auto& preds = lay.preds[t];
    if (preds.empty()) continue;
    const MatrixXd cpp = sub(construct_corr, preds, preds);
    const VectorXd cpt = sub(construct_corr, preds, {static_cast<Index>(t)});
    Eigen::LLT<MatrixXd> llt(cpp);
    if (llt.info() != Eigen::Success) throw NumericError("singular predictor correlation matrix");
    const VectorXd b = llt.solve(cpt);
    for (std::size_t k = 0; k < preds.size(); ++k) beta(static_cast<Index>(t), preds[k]) = b(static_cast<Index>(k));
  }
  std::vector<double> out;
  for (const auto& p : spec.paths) out.push_back(beta(pos[p.target], pos[p.source]));
  return out;
}

std::vector<Reason> check_admissibility_pls(const PlsResult& result) {
  std::vector<Reason> reasons;
  if (!result.weights.converged) reasons.push_back(Reason::Nonconvergence);
  bool loadings_ok = true;
  for (const auto& lam : result.correction.loadings)
    if (!lam.allFinite() || lam.cwiseAbs().maxCoeff() > 1.0 + kRangeSlack) loadings_ok = false;
  if (!loadings_ok) reasons.push_back(Reason::LoadingOutOfRange);
  const VectorXd& rho = result.correction.reliabilities;
  if (!rho.allFinite() || !(rho.array() > 0.0).all() || !(rho.array() <= 1.0 + kRangeSlack).all())
    reasons.push_back(Reason::ReliabilityOutOfRange);
  const MatrixXd& cc = result.correction.construct_corr;
  const bool paths_ok = std::all_of(result.estimate.std_paths.begin(), result.estimate.std_paths.end(),
                                    [](double v) { return std::isfinite(v); });
  if (!cc.allFinite() || !(min_eigenvalue(cc) > 0.0) || !paths_ok) reasons.push_back(Reason::NonPdConstructCorr);
  return reasons;
}

PlsResult fit_pls(const ModelSpec& spec, const MatrixXd& data, const PlsConfig& config) {
  PlsWeights w = pls_weights(data, spec, config);
  const MatrixXd r = to_correlation(sample_covariance(data));
  return finish(spec, r, config, std::move(w));
}

PlsResult fit_pls_cov(const ModelSpec& spec, const MatrixXd& s, Index n, const PlsConfig& config) {
  if (n < 2) throw std::invalid_argument("PLS needs at least two observations");
  const MatrixXd r = to_correlation(s);
  return finish(spec, r, config, pls_weights_from_correlation(r, spec, config));
}

}  // namespace icmsim
