#pragma once

#include "icmsim/model_spec.hpp"
#include "icmsim/types.hpp"

#include <string>
#include <vector>

namespace icmsim {

/// Location of one free parameter. Psi and Theta slots are stored with row >= col
/// and drive both symmetric cells.
struct ParamSlot {
  MatrixId matrix = MatrixId::Lambda;
  Index row = 0;
  Index col = 0;

  friend bool operator==(const ParamSlot&, const ParamSlot&) = default;
};

/// Values of the four model matrices plus the free/fixed pattern.
///
///   lambda: p x m loadings (indicators x constructs)
///   beta:   m x m structural coefficients, beta(target, source), strictly lower
///           triangular because constructs are stored in topological order
///   psi:    m x m covariances of exogenous constructs and disturbances
///   theta:  p x p measurement-error covariances
///
/// Every cell not listed in `free` is fixed at its stored value.
template <typename Scalar>
struct ParamTable {
  std::vector<std::string> indicators;
  std::vector<std::string> constructs;
  Mat<Scalar> lambda;
  Mat<Scalar> beta;
  Mat<Scalar> psi;
  Mat<Scalar> theta;
  std::vector<ParamSlot> free;

  Index p() const { return lambda.rows(); }
  Index m() const { return lambda.cols(); }
  Index num_free() const { return static_cast<Index>(free.size()); }

  Mat<Scalar>& matrix(MatrixId id) {
    switch (id) {
      case MatrixId::Lambda: return lambda;
      case MatrixId::Beta: return beta;
      case MatrixId::Psi: return psi;
      case MatrixId::Theta: return theta;
      case MatrixId::Gamma: break;
    }
    throw std::invalid_argument("Gamma is not a table matrix");
  }
  const Mat<Scalar>& matrix(MatrixId id) const {
    return const_cast<ParamTable*>(this)->matrix(id);
  }

  bool is_free(MatrixId id, Index r, Index c) const {
    if ((id == MatrixId::Psi || id == MatrixId::Theta) && r < c) std::swap(r, c);
    for (const auto& s : free)
      if (s.matrix == id && s.row == r && s.col == c) return true;
    return false;
  }

  Vec<Scalar> values() const {
    Vec<Scalar> v(num_free());
    for (Index k = 0; k < num_free(); ++k) {
      const auto& s = free[static_cast<std::size_t>(k)];
      v(k) = matrix(s.matrix)(s.row, s.col);
    }
    return v;
  }

  void assign(const Vec<Scalar>& v) {
    if (v.size() != num_free()) throw std::invalid_argument("parameter vector has wrong length");
    for (Index k = 0; k < num_free(); ++k) {
      const auto& s = free[static_cast<std::size_t>(k)];
      auto& mat = matrix(s.matrix);
      mat(s.row, s.col) = v(k);
      if (s.matrix == MatrixId::Psi || s.matrix == MatrixId::Theta) mat(s.col, s.row) = v(k);
    }
  }

  ParamTable with_values(const Vec<Scalar>& v) const {
    ParamTable out = *this;
    out.assign(v);
    return out;
  }

  Index construct_index(std::string_view name) const { return find_name(constructs, name); }
  Index indicator_index(std::string_view name) const { return find_name(indicators, name); }

  template <typename Other>
  ParamTable<Other> cast() const {
    return {indicators, constructs, lambda.template cast<Other>(), beta.template cast<Other>(),
            psi.template cast<Other>(), theta.template cast<Other>(), free};
  }

 private:
  static Index find_name(const std::vector<std::string>& names, std::string_view name) {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<Index>(i);
    return -1;
  }
};

using ParamTableD = ParamTable<double>;

}  // namespace icmsim
