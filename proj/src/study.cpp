#include "icmsim/study.hpp"

namespace icmsim::study {

std::string eta_name(int j) { return "eta" + std::to_string(j); }
std::string star_indicator(int i) { return "xs" + std::to_string(i); }
std::string fixed_indicator(int j, int i) { return "x" + std::to_string(j) + "_" + std::to_string(i); }

std::vector<std::string> indicator_names(int k) {
  std::vector<std::string> out;
  for (int i = 1; i <= k; ++i) out.push_back(star_indicator(i));
  for (int j = 1; j <= 3; ++j)
    for (int i = 1; i <= kFixedBlockSize; ++i) out.push_back(fixed_indicator(j, i));
  return out;
}

ModelSpec assumed_model(Position position, ConstructKind kind, int k, ScalingChoice scaling) {
  if (k < 1) throw std::invalid_argument("eta* needs at least one indicator");
  if (position == Position::Endogenous && kind == ConstructKind::CausalFormative)
    throw std::invalid_argument("an endogenous causal-formative eta* is not identified");
  const bool exo = position == Position::Exogenous;

  ModelSpec spec;
  spec.constructs.push_back({kEtaStar, kind, exo});
  for (int j = 1; j <= 3; ++j) spec.constructs.push_back({eta_name(j), ConstructKind::LatentVariable, !exo});

  for (int i = 1; i <= k; ++i) spec.indicators[kEtaStar].push_back(star_indicator(i));
  for (int j = 1; j <= 3; ++j)
    for (int i = 1; i <= kFixedBlockSize; ++i) spec.indicators[eta_name(j)].push_back(fixed_indicator(j, i));

  for (int j = 1; j <= 3; ++j) {
    if (exo)
      spec.paths.push_back({kEtaStar, eta_name(j)});
    else
      spec.paths.push_back({eta_name(j), kEtaStar});
  }

  for (int j = 1; j <= 3; ++j) {
    if (scaling == ScalingChoice::Variance && !exo)
      spec.constraints.push_back({MatrixId::Psi, eta_name(j), eta_name(j), 1.0});
    else
      spec.constraints.push_back({MatrixId::Lambda, fixed_indicator(j, 1), eta_name(j), 1.0});
  }
  switch (kind) {
    case ConstructKind::LatentVariable:
      if (scaling == ScalingChoice::Variance && exo)
        spec.constraints.push_back({MatrixId::Psi, kEtaStar, kEtaStar, 1.0});
      else
        spec.constraints.push_back({MatrixId::Lambda, star_indicator(1), kEtaStar, 1.0});
      break;
    case ConstructKind::CausalFormative:
      spec.constraints.push_back({MatrixId::Gamma, kEtaStar, star_indicator(1), 1.0});
      break;
    case ConstructKind::Composite:
      if (exo)
        spec.constraints.push_back({MatrixId::Psi, kEtaStar, kEtaStar, 1.0});
      else
        spec.constraints.push_back({MatrixId::Lambda, star_indicator(1), kEtaStar, 1.0});
      break;
  }
  return spec;
}

std::vector<ConstructKind> assumed_kinds(Position position, Estimator estimator) {
  if (estimator == Estimator::Pls || position == Position::Endogenous)
    return {ConstructKind::LatentVariable, ConstructKind::Composite};
  return {ConstructKind::LatentVariable, ConstructKind::CausalFormative, ConstructKind::Composite};
}

std::vector<ConstructKind> dgp_kinds(Position position) {
  if (position == Position::Endogenous) return {ConstructKind::LatentVariable, ConstructKind::Composite};
  return {ConstructKind::LatentVariable, ConstructKind::CausalFormative, ConstructKind::Composite};
}

}  // namespace icmsim::study
