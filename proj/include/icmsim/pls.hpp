#pragma once

#include "icmsim/estimation.hpp"
#include "icmsim/model_spec.hpp"

#include <map>
#include <string>
#include <vector>

namespace icmsim {

enum class PlsMode { A, B };
enum class InnerScheme { Centroid, Factorial, Path };

struct PlsConfig {
  std::map<std::string, PlsMode> modes;  ///< overrides; composites default to B, latents to A
  InnerScheme scheme = InnerScheme::Path;
  double tolerance = 1e-5;
  int max_iterations = 300;
  bool plsc = true;  ///< disattenuate mode A latent blocks
};

/// Mode of every construct in declaration order. Throws SpecError for
/// causal-formative constructs, an invalid tolerance or a mode B latent under PLSc.
std::vector<PlsMode> resolve_modes(const ModelSpec& spec, const PlsConfig& config);

struct PlsWeights {
  std::vector<VectorXd> weights;  ///< per construct, w' R_jj w = 1
  MatrixXd scores;                ///< n x J standardized proxies (data entry point only)
  bool converged = false;
  int iterations = 0;
};

/// Outer/inner iteration on the correlation matrix of the indicators (model order).
/// Throws NumericError for a singular mode B block.
PlsWeights pls_weights_from_correlation(const MatrixXd& r, const ModelSpec& spec, const PlsConfig& config);
/// Standardizes the data (n-1 divisor) and runs the iteration; fills the scores.
PlsWeights pls_weights(const MatrixXd& data, const ModelSpec& spec, const PlsConfig& config);

struct PlscCorrection {
  std::vector<VectorXd> loadings;  ///< consistent loadings (mode A) or R_jj w (mode B)
  VectorXd reliabilities;          ///< rho_A, 1 for composites and single indicators
  MatrixXd construct_corr;         ///< proxy correlations divided by sqrt(rho_i rho_j)
};

/// Dijkstra's rho_A correction. Blocks in mode B and single-indicator blocks
/// pass through with reliability 1.
PlscCorrection plsc_correct(const std::vector<VectorXd>& weights, const MatrixXd& r, const ModelSpec& spec,
                            const std::vector<PlsMode>& modes, bool correct);

/// OLS of each endogenous construct on its predecessors; returns the coefficients
/// of the declared paths in declaration order. Throws NumericError for a singular
/// predictor correlation matrix.
std::vector<double> pls_paths(const MatrixXd& construct_corr, const ModelSpec& spec);

struct PlsResult {
  EstimationResult estimate;  ///< sigma_hat and f_min in the correlation metric
  MatrixXd sample_corr;
  PlsWeights weights;
  PlscCorrection correction;
};

/// Full PLS-PM / PLSc fit on raw data.
PlsResult fit_pls(const ModelSpec& spec, const MatrixXd& data, const PlsConfig& config = {});
/// Same on a covariance matrix of n observations.
PlsResult fit_pls_cov(const ModelSpec& spec, const MatrixXd& s, Index n, const PlsConfig& config = {});

std::vector<Reason> check_admissibility_pls(const PlsResult& result);

}  // namespace icmsim
