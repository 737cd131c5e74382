#pragma once

#include "icmsim/estimation.hpp"

#include <array>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace icmsim {

enum class Criterion { Chi2, Srmr, Cfi, Rmsea, Cr, Ave };
inline constexpr std::array<Criterion, 6> kCriteria{Criterion::Chi2, Criterion::Srmr, Criterion::Cfi,
                                                    Criterion::Rmsea, Criterion::Cr, Criterion::Ave};
std::string_view to_string(Criterion criterion);

/// Cut-offs of the six criteria. A model is flagged when
/// p < chi2_alpha, srmr > srmr_max, cfi < cfi_min, rmsea > rmsea_max,
/// min CR < cr_min or min AVE < ave_min.
struct Thresholds {
  double chi2_alpha = 0.05;
  double srmr_max = 0.08;
  double cfi_min = 0.95;
  double rmsea_max = 0.05;
  double cr_min = 0.7;
  double ave_min = 0.5;
};

struct ChiSquare {
  double t = 0.0;
  double p_value = 1.0;
};

/// T = (n-1) F_min and its upper-tail chi-square probability. Throws
/// std::invalid_argument for df < 1 or a negative F_min beyond rounding.
ChiSquare chi_square_test(double f_min, Index n, Index df);

/// Root mean square of (s_ij - sigma_ij) / sqrt(s_ii s_jj) over i <= j.
double srmr(const MatrixXd& s, const MatrixXd& sigma_hat);

/// 1 - max(T - df, 0) / max(T_b - df_b, T - df, 0), clipped to [0, 1].
double cfi(double t, Index df, double t_base, Index df_base);

/// sqrt(max(T - df, 0) / (df (n - 1))).
double rmsea(double t, Index df, Index n);

/// Independence-model discrepancy at its optimum diag(S), F = log|diag S| - log|S|.
double independence_fmin(const MatrixXd& s);

struct CrAve {
  double cr = std::numeric_limits<double>::quiet_NaN();
  double ave = std::numeric_limits<double>::quiet_NaN();
};
/// Composite reliability and average variance extracted of one standardized block.
CrAve cr_ave(const VectorXd& loadings, const VectorXd& error_variances);

struct FitReport {
  double t = std::numeric_limits<double>::quiet_NaN();
  Index df = 0;
  double p_value = std::numeric_limits<double>::quiet_NaN();
  double srmr = std::numeric_limits<double>::quiet_NaN();
  double cfi = std::numeric_limits<double>::quiet_NaN();
  double rmsea = std::numeric_limits<double>::quiet_NaN();
  std::vector<CrAve> blocks;  ///< latent blocks
  double cr_min = std::numeric_limits<double>::quiet_NaN();
  double ave_min = std::numeric_limits<double>::quiet_NaN();
  /// Per criterion; empty when not applicable.
  std::array<std::optional<bool>, 6> flags{};

  std::optional<bool> flag(Criterion c) const { return flags[static_cast<std::size_t>(c)]; }
};

/// Flags from values alone; NaN or missing values leave the criterion unset.
void apply_flags(FitReport& report, const Thresholds& thresholds);

/// Evaluates the six criteria for an estimate against the matrix it was fitted to
/// (covariance for ML, correlation for PLS).
FitReport evaluate_fit(const EstimationResult& result, const MatrixXd& s, Index n, Index df,
                       const Thresholds& thresholds = {});

}  // namespace icmsim
