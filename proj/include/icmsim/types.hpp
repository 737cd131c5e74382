#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace icmsim {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Eigen::MatrixXd;
using VectorXd = Eigen::VectorXd;
using Index = Eigen::Index;

/// How a construct relates to its indicators.
enum class ConstructKind { LatentVariable, CausalFormative, Composite };

enum class Position { Exogenous, Endogenous };

enum class Estimator { Ml, Pls };

std::string_view to_string(ConstructKind kind);
std::string_view to_string(Position position);
std::string_view to_string(Estimator estimator);

/// Accepts the canonical names ("latent", "causal_formative", "composite")
/// plus a few common aliases. Throws std::invalid_argument otherwise.
ConstructKind parse_construct_kind(std::string_view text);
Position parse_position(std::string_view text);
Estimator parse_estimator(std::string_view text);

/// Raised when a ModelSpec violates one of its structural invariants.
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by numerical routines when an input matrix is unusable
/// (not positive definite, singular, non-finite).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace icmsim
