#pragma once

#include "icmsim/hospec.hpp"
#include "icmsim/implied.hpp"
#include "icmsim/model_spec.hpp"
#include "icmsim/param_table.hpp"

#include <string>
#include <vector>

namespace icmsim {

/// What a construct of the compiled table stands for.
enum class ConstructRole {
  Regular,      ///< declared latent variable or composite
  FormativeHub, ///< causal-formative construct, regressed on its single-indicator latents
  Perfect,      ///< single-indicator latent standing in for a formative indicator
  Excrescent,   ///< auxiliary variable of a reparameterized composite block
};

struct CompiledConstruct {
  std::string name;
  ConstructKind kind = ConstructKind::LatentVariable;  ///< kind as declared (owner's kind for auxiliaries)
  ConstructRole role = ConstructRole::Regular;
  bool exogenous = true;
  std::string owner;  ///< declared construct this auxiliary belongs to
};

struct CompositeBinding {
  Index construct = 0;
  std::vector<Index> indicators;
  std::vector<Index> excrescent;
  CompositeScaling scaling = CompositeScaling::Variance;
};

struct PathRef {
  Index source = 0;
  Index target = 0;
};

/// A ModelSpec lowered onto a single (Lambda, B, Psi, Theta) parameterization:
/// causal-formative constructs are augmented, composites reparameterized.
struct Model {
  ModelSpec spec;
  ModelSpec augmented;
  ParamTableD table;  ///< pattern plus default starting values
  std::vector<CompiledConstruct> constructs;
  std::vector<PathRef> reported_paths;  ///< declared paths, in declaration order
  std::vector<CompositeBinding> composites;

  Index p() const { return table.p(); }
  Index m() const { return table.m(); }
  Index q() const { return table.num_free(); }
  /// Constructs with a reflective indicator block (CR/AVE are defined for these).
  std::vector<Index> latent_blocks() const;
};

Model compile(const ModelSpec& spec);

/// Replaces each causal-formative indicator x_j by a perfectly measured latent
/// xi_j (loading 1, error variance 0) and regresses the formative construct on
/// the xi's. Specs without formative constructs are returned unchanged.
ModelSpec augment_causal_formative(const ModelSpec& spec);

inline std::string perfect_latent_name(std::string_view indicator) {
  return "xi:" + std::string(indicator);
}
inline std::string excrescent_name(std::string_view composite, Index j) {
  return std::string(composite) + ":nu" + std::to_string(j);
}

/// p(p+1)/2 - q. Throws SpecError when negative.
Index degrees_of_freedom(const Model& model);
Index degrees_of_freedom(const ModelSpec& spec);

/// Constructs with an unrestricted (disturbance) variance that emit fewer than two
/// paths to variables with unrestricted error or disturbance variances.
std::vector<std::string> check_emitted_paths(const ModelSpec& spec);

/// B_std(t, s) = B(t, s) sd(s) / sd(t) using model-implied construct standard
/// deviations. Throws NumericError for a non-positive implied variance on a path.
template <typename Scalar>
Mat<Scalar> standardize(const ParamTable<Scalar>& t) {
  const Mat<Scalar> c = construct_covariance(t);
  Mat<Scalar> out = Mat<Scalar>::Zero(t.m(), t.m());
  for (Index r = 0; r < t.m(); ++r)
    for (Index s = 0; s < t.m(); ++s) {
      if (t.beta(r, s) == Scalar(0)) continue;
      if (!(c(r, r) > Scalar(0)) || !(c(s, s) > Scalar(0)))
        throw NumericError("non-positive implied construct variance");
      using std::sqrt;
      out(r, s) = t.beta(r, s) * sqrt(c(s, s)) / sqrt(c(r, r));
    }
  return out;
}

/// Standardized coefficients of the declared paths, in declaration order.
std::vector<double> standardized_paths(const Model& model, const ParamTableD& table);

/// Rank of d vech(Sigma) / d theta at the given parameter point.
Index jacobian_rank(const Model& model, const VectorXd& theta);

}  // namespace icmsim
