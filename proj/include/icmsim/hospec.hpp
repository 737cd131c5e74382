#pragma once

#include "icmsim/types.hpp"

namespace icmsim {

/// How the composite of a reparameterized block is scaled.
enum class CompositeScaling { Variance, FirstLoading };

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Composite block in Henseler-Ogasawara form.
///
/// Column 0 of `lambda` belongs to the composite, column j (1 <= j < K) to the
/// excrescent variable nu_j, which loads on indicators j-1 and j (zero-based); the
/// loading on indicator j is anchored at -1. Excrescent variables covary among
/// themselves but never with the composite; all error variances are fixed at 0.
struct HospecBlock {
  Index k = 0;
  CompositeScaling scaling = CompositeScaling::Variance;
  MatrixXd lambda;
  BoolMatrix lambda_free;
  MatrixXd psi;
  BoolMatrix psi_free;  ///< meaningful on and below the diagonal
  MatrixXd theta;

  Index num_free() const;
};

/// Loading anchor of the excrescent variables.
inline constexpr double kExcrescentAnchor = -1.0;

/// Builds the block pattern and audits it: the block's implied K x K covariance
/// must be unrestricted (Jacobian rank K(K+1)/2). Throws NumericError when the
/// audit fails.
HospecBlock build_hospec(Index k, CompositeScaling scaling = CompositeScaling::Variance);

/// Rank of d vech(Lambda Psi Lambda') / d(free parameters) at a generic point.
Index saturation_rank(const HospecBlock& block);

/// Row of Lambda^{-1} that belongs to the composite. Throws NumericError when
/// Lambda is singular (condition number >= 1e12).
VectorXd recover_weights(const MatrixXd& lambda_hat);

/// Condition number (ratio of extreme singular values).
double condition_number(const MatrixXd& m);

/// Exact block values for indicator covariance `sxx` and composite weights `w`
/// (w' sxx w = 1): lambda = [sxx w, L_nu], psi = diag(1, Phi_nu).
struct HospecValues {
  MatrixXd lambda;
  MatrixXd psi;
};
HospecValues hospec_values(const MatrixXd& sxx, const VectorXd& w);

/// Data-informed starting values: composite loadings S w0 with equal weights w0
/// scaled to unit composite variance, excrescent loadings 0.1, excrescent
/// covariances 0 and variances from the rotated block covariance.
HospecValues hospec_start_values(const MatrixXd& s_block, CompositeScaling scaling);

}  // namespace icmsim
