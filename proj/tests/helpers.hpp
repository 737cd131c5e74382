#pragma once

#include "icmsim/dgp.hpp"

#include <cmath>
#include <stdexcept>

namespace icmsim::testing {

inline DesignCondition find_condition(Position pos, int n, int k, double sigma, bool homogeneous) {
  for (const auto& c : design_grid())
    if (c.position == pos && c.n == n && c.k == k && std::abs(c.sigma - sigma) < 1e-9 && c.homogeneous == homogeneous)
      return c;
  throw std::logic_error("condition not in grid");
}

/// One latent construct measured by `k` indicators, first loading fixed at 1.
inline ModelSpec single_latent(int k) {
  ModelSpec spec;
  spec.constructs.push_back({"eta", ConstructKind::LatentVariable, true});
  for (int i = 1; i <= k; ++i) spec.indicators["eta"].push_back("x" + std::to_string(i));
  spec.constraints.push_back({MatrixId::Lambda, "x1", "eta", 1.0});
  return spec;
}

}  // namespace icmsim::testing
