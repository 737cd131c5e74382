#pragma once

#include "icmsim/model.hpp"
#include "icmsim/study.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace icmsim {

/// One cell of the simulation design.
struct DesignCondition {
  int id = 0;
  Position position = Position::Exogenous;
  int n = 100;
  int k = 3;
  double sigma = 0.1;
  bool homogeneous = true;

  friend bool operator==(const DesignCondition&, const DesignCondition&) = default;
};

/// The 108 conditions ordered by position, n, K, sigma and homogeneity
/// (homogeneous first); `id` is the position in this list.
std::vector<DesignCondition> design_grid();

/// Throws std::invalid_argument for an invalid (condition, DGP kind) pair.
void validate_condition(const DesignCondition& condition, ConstructKind dgp_kind);

/// Unit-diagonal K x K matrix. Homogeneous: every off-diagonal equals sigma.
/// Heterogeneous: equidistant values from sigma-0.1 to sigma+0.1 over the pairs
/// (1,2),(1,3),...,(K-1,K). Throws NumericError when the result is not PD.
MatrixXd indicator_correlations(int k, double sigma, bool homogeneous);

/// Equal weights 1/sqrt(1' Sxx 1), so that w' Sxx w = 1.
VectorXd composite_weights(const MatrixXd& sxx);

/// lambda* = Sxx w, the covariances of the eta* indicators with eta*.
VectorXd eta_star_loadings(const MatrixXd& sxx, const VectorXd& w);

struct PopulationOptions {
  std::array<double, 3> std_paths = study::kStdPaths;
  /// Covariance of eta1..eta3 in the endogenous case (identity by default).
  std::optional<MatrixXd> endogenous_phi;
  study::ScalingChoice scaling = study::ScalingChoice::FirstLoading;
};

/// True population of one design condition and DGP kind.
struct PopulationModel {
  DesignCondition condition;
  ConstructKind dgp_kind = ConstructKind::LatentVariable;
  std::array<double, 3> std_paths0{};
  MatrixXd sigma0;  ///< indicator covariance, assembled block by block
  Model model;      ///< correctly specified model of the DGP
  ParamTableD theta0;

  // Generative recipe.
  MatrixXd sxx;              ///< correlations of the eta* indicators (latent: implied)
  VectorXd w;                ///< composite weights
  VectorXd lambda_star;      ///< Cov(x*, eta*)
  VectorXd paths;            ///< unstandardized coefficients eta* <-> eta_j
  MatrixXd construct_cov;    ///< Cov of (eta*, eta1, eta2, eta3)
  MatrixXd phi;              ///< Cov of eta1..eta3 (endogenous case)
  double star_variance = 1;  ///< Var(eta*)
};

PopulationModel build_population(const DesignCondition& condition, ConstructKind dgp_kind,
                                 const PopulationOptions& options = {});

nlohmann::json to_json(const PopulationModel& pop);

/// Counter-based seed for replication `rep` of a condition and DGP kind.
std::uint64_t derive_seed(std::uint64_t master_seed, int condition_id, ConstructKind dgp_kind,
                          std::uint64_t rep);

struct SampleDraw {
  MatrixXd x;           ///< n x p indicators
  MatrixXd constructs;  ///< n x 4 scores of (eta*, eta1, eta2, eta3)
};

/// Draws n rows through the structural recipe (constructs first, then indicators).
SampleDraw draw_sample_with_constructs(const PopulationModel& pop, Index n, std::uint64_t seed);
MatrixXd draw_sample(const PopulationModel& pop, Index n, std::uint64_t seed);

/// Centers the sample and maps it by S^{-1/2} Sigma0^{1/2} so that its n-1 covariance
/// equals sigma0. Throws NumericError when the sample covariance is singular.
MatrixXd normalize_to_population(const MatrixXd& sample, const MatrixXd& sigma0);

}  // namespace icmsim
