#include "icmsim/ml.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace icmsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kEigenFloor = -1e-8;

void scatter(const ParamTableD& base, const VectorXd& theta, MatrixXd& l, MatrixXd& b, MatrixXd& ps,
             MatrixXd& th) {
  l = base.lambda;
  b = base.beta;
  ps = base.psi;
  th = base.theta;
  for (Index k = 0; k < theta.size(); ++k) {
    const auto& slot = base.free[static_cast<std::size_t>(k)];
    switch (slot.matrix) {
      case MatrixId::Lambda: l(slot.row, slot.col) = theta(k); break;
      case MatrixId::Beta: b(slot.row, slot.col) = theta(k); break;
      case MatrixId::Psi: ps(slot.row, slot.col) = ps(slot.col, slot.row) = theta(k); break;
      case MatrixId::Theta: th(slot.row, slot.col) = th(slot.col, slot.row) = theta(k); break;
      case MatrixId::Gamma: break;
    }
  }
}

}  // namespace

MlObjective::MlObjective(const Model& model, const MatrixXd& s) : model_(&model), s_(s) {
  if (s.rows() != model.p() || s.cols() != model.p())
    throw std::invalid_argument("sample covariance does not match the model's indicators");
  Eigen::LLT<MatrixXd> llt(s);
  if (llt.info() != Eigen::Success || !s.allFinite())
    throw NumericError("sample covariance is not positive definite");
  logdet_s_ = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double MlObjective::value(const VectorXd& theta) const {
  VectorXd g;
  return value_and_gradient(theta, g);
}

double MlObjective::value_and_gradient(const VectorXd& theta, VectorXd& grad) const {
  const ParamTableD& base = model_->table;
  if (theta.size() != base.num_free()) throw std::invalid_argument("parameter vector has wrong length");
  grad.setZero(theta.size());
  if (!theta.allFinite()) return kInf;
  MatrixXd l, b, ps, th;
  scatter(base, theta, l, b, ps, th);

  const Index p = l.rows();
  const MatrixXd a = structural_inverse(b);
  const MatrixXd c = a * ps * a.transpose();
  MatrixXd sigma = l * c * l.transpose() + th;
  sigma = (sigma + sigma.transpose()) / 2;
  Eigen::LLT<MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) return kInf;
  const MatrixXd sigma_inv = llt.solve(MatrixXd::Identity(p, p));
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const MatrixXd sis = sigma_inv * s_;
  const double f = logdet + sis.trace() - logdet_s_ - static_cast<double>(p);
  if (!std::isfinite(f)) return kInf;

  const MatrixXd m = sigma_inv - sis * sigma_inv;
  const MatrixXd g = l * a;
  const MatrixXd mlc = m * l * c;
  for (Index k = 0; k < theta.size(); ++k) {
    const auto& slot = base.free[static_cast<std::size_t>(k)];
    const Index r = slot.row, col = slot.col;
    switch (slot.matrix) {
      case MatrixId::Lambda: grad(k) = 2.0 * mlc(r, col); break;
      case MatrixId::Beta: grad(k) = 2.0 * g.col(r).dot(mlc.col(col)); break;
      case MatrixId::Psi: {
        const double v = g.col(r).dot(m * g.col(col));
        grad(k) = r == col ? v : 2.0 * v;
        break;
      }
      case MatrixId::Theta: grad(k) = r == col ? m(r, col) : 2.0 * m(r, col); break;
      case MatrixId::Gamma: break;
    }
  }
  return f;
}

VectorXd MlObjective::numeric_gradient(const VectorXd& theta, double h) const {
  VectorXd out(theta.size());
  for (Index j = 0; j < theta.size(); ++j) {
    const double step = h * std::max(1.0, std::abs(theta(j)));
    VectorXd tp = theta, tm = theta;
    tp(j) += step;
    tm(j) -= step;
    out(j) = (value(tp) - value(tm)) / (2 * step);
  }
  return out;
}

VectorXd ml_start_values(const Model& model, const MatrixXd& s) {
  ParamTableD t = model.table;
  for (const auto& binding : model.composites) {
    const Index k = static_cast<Index>(binding.indicators.size());
    MatrixXd block(k, k);
    for (Index i = 0; i < k; ++i)
      for (Index j = 0; j < k; ++j) block(i, j) = s(binding.indicators[i], binding.indicators[j]);
    const HospecValues hv = hospec_start_values(block, binding.scaling);
    std::vector<Index> cols{binding.construct};
    cols.insert(cols.end(), binding.excrescent.begin(), binding.excrescent.end());
    for (Index i = 0; i < k; ++i)
      for (Index j = 0; j < k; ++j) {
        const Index row = binding.indicators[i], col = cols[static_cast<std::size_t>(j)];
        if (t.is_free(MatrixId::Lambda, row, col)) t.lambda(row, col) = hv.lambda(i, j);
      }
    const bool exogenous = model.constructs[static_cast<std::size_t>(binding.construct)].exogenous;
    for (Index i = 0; i < k; ++i)
      for (Index j = 0; j <= i; ++j) {
        if (i == 0 && !exogenous) continue;
        const Index a = cols[static_cast<std::size_t>(i)], b = cols[static_cast<std::size_t>(j)];
        if (t.is_free(MatrixId::Psi, a, b)) t.psi(a, b) = t.psi(b, a) = hv.psi(i, j);
      }
  }
  // Single-indicator latents of formative blocks start at the sample moments.
  std::vector<std::pair<Index, Index>> perfect;
  for (std::size_t c = 0; c < model.constructs.size(); ++c)
    if (model.constructs[c].role == ConstructRole::Perfect) {
      const Index ci = static_cast<Index>(c);
      for (Index x = 0; x < t.p(); ++x)
        if (t.lambda(x, ci) != 0.0) perfect.emplace_back(ci, x);
    }
  for (const auto& [ca, xa] : perfect)
    for (const auto& [cb, xb] : perfect)
      if (t.is_free(MatrixId::Psi, ca, cb)) t.psi(ca, cb) = t.psi(cb, ca) = s(xa, xb);
  return t.values();
}

VectorXd ml_standard_errors(const MlObjective& objective, const VectorXd& theta, Index n) {
  const Index q = theta.size();
  VectorXd se = VectorXd::Constant(q, kNaN);
  if (q == 0) return se;
  if (n < 2) throw std::invalid_argument("standard errors need n >= 2");
  MatrixXd h(q, q);
  VectorXd gp(q), gm(q);
  for (Index j = 0; j < q; ++j) {
    const double step = 1e-5 * std::max(1.0, std::abs(theta(j)));
    VectorXd tp = theta, tm = theta;
    tp(j) += step;
    tm(j) -= step;
    const double fp = objective.value_and_gradient(tp, gp);
    const double fm = objective.value_and_gradient(tm, gm);
    if (!std::isfinite(fp) || !std::isfinite(fm)) return se;
    h.col(j) = (gp - gm) / (2 * step);
  }
  h = (h + h.transpose()) / 2;
  const Eigen::FullPivLU<MatrixXd> lu(h);
  if (!lu.isInvertible()) return se;
  const MatrixXd cov = lu.inverse() * (2.0 / static_cast<double>(n - 1));
  for (Index j = 0; j < q; ++j)
    if (std::isfinite(cov(j, j)) && cov(j, j) >= 0.0) se(j) = std::sqrt(cov(j, j));
  return se;
}

void fill_block_measures(const Model& model, EstimationResult& result) {
  result.block_loadings.clear();
  result.block_errors.clear();
  const ParamTableD& t = result.table;
  const MatrixXd c = construct_covariance(t);
  for (Index ci : model.latent_blocks()) {
    std::vector<Index> xs;
    for (Index x = 0; x < t.p(); ++x)
      if (model.table.lambda(x, ci) != 0.0 || model.table.is_free(MatrixId::Lambda, x, ci)) xs.push_back(x);
    VectorXd lam(static_cast<Index>(xs.size())), err(static_cast<Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double var_x = result.sigma_hat(xs[i], xs[i]);
      const bool ok = c(ci, ci) > 0.0 && var_x > 0.0;
      lam(static_cast<Index>(i)) = ok ? t.lambda(xs[i], ci) * std::sqrt(c(ci, ci) / var_x) : kNaN;
      err(static_cast<Index>(i)) = ok ? t.theta(xs[i], xs[i]) / var_x : kNaN;
    }
    result.block_loadings.push_back(lam);
    result.block_errors.push_back(err);
  }
}

std::vector<Reason> check_admissibility(const EstimationResult& result, const Model& model) {
  std::vector<Reason> reasons;
  if (!result.converged) reasons.push_back(Reason::Nonconvergence);
  const ParamTableD& t = result.table;
  if (result.se.size() > 0 && !(result.se.array() >= 0.0).all()) reasons.push_back(Reason::NegativeSe);

  const MatrixXd c = construct_covariance(t);
  const bool paths_ok = std::all_of(result.std_paths.begin(), result.std_paths.end(),
                                    [](double v) { return std::isfinite(v); });
  if (!c.allFinite() || min_eigenvalue(c) <= kEigenFloor || !paths_ok)
    reasons.push_back(Reason::NonPdConstructCov);

  std::vector<Index> rows;
  for (Index i = 0; i < t.p(); ++i)
    if (model.table.is_free(MatrixId::Theta, i, i) || t.theta(i, i) != 0.0) rows.push_back(i);
  MatrixXd th(static_cast<Index>(rows.size()), static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.size(); ++j)
      th(static_cast<Index>(i), static_cast<Index>(j)) = t.theta(rows[i], rows[j]);
  if (!th.allFinite() || min_eigenvalue(th) <= kEigenFloor) reasons.push_back(Reason::NonPdErrorCov);

  for (const auto& binding : model.composites) {
    const Index k = static_cast<Index>(binding.indicators.size());
    std::vector<Index> cols{binding.construct};
    cols.insert(cols.end(), binding.excrescent.begin(), binding.excrescent.end());
    MatrixXd block(k, k);
    for (Index i = 0; i < k; ++i)
      for (Index j = 0; j < k; ++j) block(i, j) = t.lambda(binding.indicators[i], cols[static_cast<std::size_t>(j)]);
    if (!block.allFinite() || !(condition_number(block) < 1e12)) {
      reasons.push_back(Reason::SingularRotation);
      break;
    }
  }
  return reasons;
}

EstimationResult fit_ml(const Model& model, const MatrixXd& s, Index n, const MlOptions& options) {
  const MlObjective objective(model, s);
  const VectorXd x0 = ml_start_values(model, s);
  if (!std::isfinite(objective.value(x0))) throw NumericError("discrepancy is not finite at the starting values");

  const OptimizerResult opt = minimize_bfgs(
      [&](const VectorXd& x, VectorXd& g) { return objective.value_and_gradient(x, g); }, x0, options.optimizer);

  EstimationResult result;
  result.estimator = Estimator::Ml;
  result.table = model.table.with_values(opt.x);
  result.f_min = opt.f;
  result.converged = opt.converged;
  result.iterations = opt.iterations;
  result.sigma_hat = implied_covariance(result.table);
  try {
    result.std_paths = standardized_paths(model, result.table);
  } catch (const NumericError&) {
    result.std_paths.assign(model.reported_paths.size(), kNaN);
  }
  if (options.standard_errors) result.se = ml_standard_errors(objective, opt.x, n);
  fill_block_measures(model, result);
  result.reasons = check_admissibility(result, model);
  return result;
}

EstimationResult fit_ml(const ModelSpec& spec, const MatrixXd& s, Index n, const MlOptions& options) {
  const Model model = compile(spec);
  return fit_ml(model, s, n, options);
}

}  // namespace icmsim
