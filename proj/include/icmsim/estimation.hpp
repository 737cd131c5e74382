#pragma once

#include "icmsim/param_table.hpp"

#include <limits>
#include <string>
#include <vector>

namespace icmsim {

/// Why a solution is inadmissible.
enum class Reason {
  Nonconvergence,
  NegativeSe,
  NonPdConstructCov,
  NonPdErrorCov,
  SingularRotation,
  LoadingOutOfRange,
  ReliabilityOutOfRange,
  NonPdConstructCorr,
};

std::string_view to_string(Reason reason);
/// Reason codes joined by '|'; empty for an admissible solution.
std::string join_reasons(const std::vector<Reason>& reasons);

/// Estimator output shared by ML and PLS.
struct EstimationResult {
  Estimator estimator = Estimator::Ml;
  ParamTableD table;              ///< estimates (ML) or the implied-structure table (PLS, may be empty)
  std::vector<double> std_paths;  ///< declared paths, declaration order
  VectorXd se;                    ///< per free parameter (ML)
  MatrixXd sigma_hat;             ///< model-implied indicator covariance
  double f_min = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int iterations = 0;
  std::vector<Reason> reasons;

  // Latent blocks: standardized loadings and error variances for CR/AVE.
  std::vector<VectorXd> block_loadings;
  std::vector<VectorXd> block_errors;

  bool admissible() const { return reasons.empty(); }
};

}  // namespace icmsim
