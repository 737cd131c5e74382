#pragma once

#include "icmsim/estimation.hpp"
#include "icmsim/linalg.hpp"
#include "icmsim/model.hpp"
#include "icmsim/optimizer.hpp"

#include <cmath>
#include <limits>

namespace icmsim {

/// log|Sigma| + tr(S Sigma^{-1}) - log|S| - p. Throws NumericError when S or
/// Sigma is not positive definite.
template <typename DS, typename DSigma>
typename DS::Scalar fml(const Eigen::MatrixBase<DS>& s, const Eigen::MatrixBase<DSigma>& sigma) {
  using Scalar = typename DS::Scalar;
  if (s.rows() != sigma.rows() || s.cols() != sigma.cols() || s.rows() != s.cols())
    throw std::invalid_argument("fml: dimension mismatch");
  Eigen::LLT<Mat<Scalar>> ls(s.eval()), lsig(sigma.eval());
  if (ls.info() != Eigen::Success || !s.allFinite()) throw NumericError("fml: S is not positive definite");
  if (lsig.info() != Eigen::Success || !sigma.allFinite())
    throw NumericError("fml: Sigma is not positive definite");
  using std::log;
  const Scalar logdet_s = Scalar(2) * ls.matrixLLT().diagonal().array().log().sum();
  const Scalar logdet_sigma = Scalar(2) * lsig.matrixLLT().diagonal().array().log().sum();
  const Scalar trace = lsig.solve(s.eval()).trace();
  return logdet_sigma + trace - logdet_s - Scalar(s.rows());
}

/// ML discrepancy as a function of the free parameters of a compiled model.
class MlObjective {
 public:
  MlObjective(const Model& model, const MatrixXd& s);

  /// F at theta; +inf when the implied covariance is not positive definite.
  double value(const VectorXd& theta) const;
  /// F and its analytic gradient.
  double value_and_gradient(const VectorXd& theta, VectorXd& grad) const;
  /// Central-difference gradient, for audits.
  VectorXd numeric_gradient(const VectorXd& theta, double h = 1e-6) const;

  const Model& model() const { return *model_; }

 private:
  const Model* model_;
  MatrixXd s_;
  double logdet_s_ = 0.0;
};

struct MlOptions {
  OptimizerOptions optimizer;
  bool standard_errors = true;
};

/// Starting values: defaults of the compiled table, composite blocks from the
/// sample, single-indicator formative latents at their sample moments.
VectorXd ml_start_values(const Model& model, const MatrixXd& s);

/// Quasi-Newton ML fit. Nonconvergence is reported in the result; a non-finite
/// discrepancy at the starting values throws NumericError.
EstimationResult fit_ml(const Model& model, const MatrixXd& s, Index n, const MlOptions& options = {});
EstimationResult fit_ml(const ModelSpec& spec, const MatrixXd& s, Index n, const MlOptions& options = {});

/// Standard errors sqrt(diag(2/(n-1) H^{-1})) with H the central-difference
/// Hessian of F; entries are NaN where the diagonal is negative or non-finite.
VectorXd ml_standard_errors(const MlObjective& objective, const VectorXd& theta, Index n);

/// Every failed admissibility check of an ML solution.
std::vector<Reason> check_admissibility(const EstimationResult& result, const Model& model);

/// Fills standardized loadings and error variances of the latent blocks.
void fill_block_measures(const Model& model, EstimationResult& result);

}  // namespace icmsim
