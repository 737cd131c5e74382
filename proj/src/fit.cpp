#include "icmsim/fit.hpp"

#include "icmsim/linalg.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>

namespace icmsim {

std::string_view to_string(Criterion criterion) {
  switch (criterion) {
    case Criterion::Chi2: return "chi2";
    case Criterion::Srmr: return "srmr";
    case Criterion::Cfi: return "cfi";
    case Criterion::Rmsea: return "rmsea";
    case Criterion::Cr: return "cr";
    case Criterion::Ave: return "ave";
  }
  return "?";
}

ChiSquare chi_square_test(double f_min, Index n, Index df) {
  if (df < 1) throw std::invalid_argument("chi-square test needs df >= 1");
  if (n < 2) throw std::invalid_argument("chi-square test needs n >= 2");
  if (!(f_min >= -1e-8)) throw std::invalid_argument("discrepancy must be non-negative");
  ChiSquare out;
  out.t = static_cast<double>(n - 1) * std::max(f_min, 0.0);
  out.p_value = boost::math::gamma_q(static_cast<double>(df) / 2.0, out.t / 2.0);
  return out;
}

double srmr(const MatrixXd& s, const MatrixXd& sigma_hat) {
  if (s.rows() != sigma_hat.rows() || s.cols() != sigma_hat.cols() || s.rows() != s.cols())
    throw std::invalid_argument("srmr: dimension mismatch");
  const Index p = s.rows();
  double sum = 0.0;
  for (Index j = 0; j < p; ++j)
    for (Index i = j; i < p; ++i) {
      const double r = (s(i, j) - sigma_hat(i, j)) / std::sqrt(s(i, i) * s(j, j));
      sum += r * r;
    }
  return std::sqrt(sum / static_cast<double>(vech_size(p)));
}

double cfi(double t, Index df, double t_base, Index df_base) {
  const double d = std::max(t - static_cast<double>(df), 0.0);
  const double d_base = std::max(t_base - static_cast<double>(df_base), 0.0);
  const double denom = std::max(d, d_base);
  if (denom <= 0.0) return 1.0;
  return std::clamp(1.0 - d / denom, 0.0, 1.0);
}

double rmsea(double t, Index df, Index n) {
  if (df < 1) throw std::invalid_argument("rmsea needs df >= 1");
  return std::sqrt(std::max(t - static_cast<double>(df), 0.0) / (static_cast<double>(df) * static_cast<double>(n - 1)));
}

double independence_fmin(const MatrixXd& s) {
  Eigen::LLT<MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) throw NumericError("S is not positive definite");
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return s.diagonal().array().log().sum() - logdet;
}

CrAve cr_ave(const VectorXd& loadings, const VectorXd& error_variances) {
  if (loadings.size() != error_variances.size() || loadings.size() == 0)
    throw std::invalid_argument("cr_ave: block sizes differ or are empty");
  const double sum = loadings.sum();
  const double sq = loadings.squaredNorm();
  const double err = error_variances.sum();
  return {sum * sum / (sum * sum + err), sq / (sq + err)};
}

void apply_flags(FitReport& r, const Thresholds& th) {
  auto set = [&](Criterion c, double v, bool poor) {
    r.flags[static_cast<std::size_t>(c)] = std::isfinite(v) ? std::optional<bool>(poor) : std::nullopt;
  };
  r.flags.fill(std::nullopt);
  if (r.df >= 1) {
    set(Criterion::Chi2, r.p_value, r.p_value < th.chi2_alpha);
    set(Criterion::Cfi, r.cfi, r.cfi < th.cfi_min);
    set(Criterion::Rmsea, r.rmsea, r.rmsea > th.rmsea_max);
  }
  set(Criterion::Srmr, r.srmr, r.srmr > th.srmr_max);
  set(Criterion::Cr, r.cr_min, r.cr_min < th.cr_min);
  set(Criterion::Ave, r.ave_min, r.ave_min < th.ave_min);
}

FitReport evaluate_fit(const EstimationResult& result, const MatrixXd& s, Index n, Index df,
                       const Thresholds& thresholds) {
  FitReport r;
  r.df = df;
  if (result.sigma_hat.size() > 0 && result.sigma_hat.allFinite()) r.srmr = srmr(s, result.sigma_hat);
  if (df >= 1 && std::isfinite(result.f_min) && result.f_min >= -1e-8) {
    const ChiSquare chi = chi_square_test(result.f_min, n, df);
    r.t = chi.t;
    r.p_value = chi.p_value;
    const Index p = s.rows();
    const double t_base = static_cast<double>(n - 1) * independence_fmin(s);
    r.cfi = cfi(r.t, df, t_base, p * (p - 1) / 2);
    r.rmsea = rmsea(r.t, df, n);
  }
  for (std::size_t b = 0; b < result.block_loadings.size(); ++b) {
    const CrAve ca = cr_ave(result.block_loadings[b], result.block_errors[b]);
    r.blocks.push_back(ca);
    if (!std::isfinite(ca.cr) || !std::isfinite(ca.ave)) {
      r.cr_min = r.ave_min = std::numeric_limits<double>::quiet_NaN();
      break;
    }
    r.cr_min = std::isfinite(r.cr_min) ? std::min(r.cr_min, ca.cr) : ca.cr;
    r.ave_min = std::isfinite(r.ave_min) ? std::min(r.ave_min, ca.ave) : ca.ave;
  }
  apply_flags(r, thresholds);
  return r;
}

}  // namespace icmsim
