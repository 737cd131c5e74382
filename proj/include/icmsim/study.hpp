#pragma once

#include "icmsim/model_spec.hpp"

#include <array>
#include <string>
#include <vector>

namespace icmsim::study {

/// The simulated structural model: three latent constructs with four indicators
/// each and a construct eta* whose indicator-construct model and position vary.
inline constexpr int kFixedBlockSize = 4;
inline constexpr double kFixedLoading = 0.8;
inline constexpr double kFixedErrorVariance = 0.36;
inline constexpr std::array<double, 3> kStdPaths{0.4, 0.3, 0.2};
inline constexpr double kFormativeDisturbance = 0.25;

inline const std::string kEtaStar = "eta_star";
std::string eta_name(int j);                  ///< "eta1".."eta3"
std::string star_indicator(int i);            ///< "xs1".."xsK"
std::string fixed_indicator(int j, int i);    ///< "x1_1".."x3_4"

/// Indicator order shared by populations and every assumed model.
std::vector<std::string> indicator_names(int k);

enum class ScalingChoice { FirstLoading, Variance };

/// Assumed model for eta* of the given kind. Latent blocks fix the first loading,
/// formative constructs the first weight, exogenous composites their variance and
/// endogenous composites their first loading. With ScalingChoice::Variance the
/// exogenous latent constructs are scaled by a unit variance instead.
///
/// Throws std::invalid_argument for an endogenous causal-formative construct.
ModelSpec assumed_model(Position position, ConstructKind kind, int k,
                        ScalingChoice scaling = ScalingChoice::FirstLoading);

/// Assumed ICMs estimable for a position and estimator.
std::vector<ConstructKind> assumed_kinds(Position position, Estimator estimator);
/// DGP kinds available for a position.
std::vector<ConstructKind> dgp_kinds(Position position);

}  // namespace icmsim::study
