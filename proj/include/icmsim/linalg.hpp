#pragma once

#include "icmsim/types.hpp"

#include <cmath>
#include <limits>

namespace icmsim {

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

template <typename Derived>
typename Derived::Scalar symmetry_defect(const Eigen::MatrixBase<Derived>& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

/// Smallest eigenvalue of a symmetric matrix; +inf for an empty matrix.
template <typename Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() == 0) return std::numeric_limits<Scalar>::infinity();
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(m.eval(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

template <typename Derived>
bool is_positive_definite(const Eigen::MatrixBase<Derived>& m) {
  if (!m.allFinite()) return false;
  Eigen::LLT<Mat<typename Derived::Scalar>> llt(m.eval());
  return llt.info() == Eigen::Success;
}

/// Symmetric square root V diag(sqrt(d)) V' of a positive semi-definite matrix.
template <typename Derived>
Mat<typename Derived::Scalar> symmetric_sqrt(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(m.eval());
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  const Vec<Scalar> d = es.eigenvalues();
  if (d.minCoeff() < Scalar(0) && d.minCoeff() < -Scalar(1e-12) * std::abs(d.maxCoeff()))
    throw NumericError("matrix square root of an indefinite matrix");
  return es.eigenvectors() * d.cwiseMax(Scalar(0)).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

/// Symmetric inverse square root; throws when the matrix is (numerically) singular.
template <typename Derived>
Mat<typename Derived::Scalar> symmetric_inverse_sqrt(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(m.eval());
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  const Vec<Scalar> d = es.eigenvalues();
  if (d.minCoeff() <= Scalar(1e-14) * std::max(Scalar(1), d.maxCoeff()))
    throw NumericError("singular covariance matrix");
  return es.eigenvectors() * d.cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

/// Column-centered copy of a data matrix.
template <typename Derived>
Mat<typename Derived::Scalar> centered(const Eigen::MatrixBase<Derived>& x) {
  return x.rowwise() - x.colwise().mean();
}

/// Sample covariance with the n-1 divisor used throughout the library.
template <typename Derived>
Mat<typename Derived::Scalar> sample_covariance(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.rows() < 2) throw NumericError("sample covariance needs at least two rows");
  const Mat<Scalar> xc = centered(x);
  Mat<Scalar> s = (xc.transpose() * xc) / Scalar(x.rows() - 1);
  return (s + s.transpose()) / Scalar(2);
}

/// D^{-1/2} S D^{-1/2} with D = diag(S).
template <typename Derived>
Mat<typename Derived::Scalar> to_correlation(const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  const Vec<Scalar> inv_sd = s.diagonal().cwiseSqrt().cwiseInverse();
  return inv_sd.asDiagonal() * s * inv_sd.asDiagonal();
}

/// Number of non-redundant elements of a p x p symmetric matrix.
constexpr Index vech_size(Index p) { return p * (p + 1) / 2; }

/// Stacks the lower triangle (including the diagonal) column by column.
template <typename Derived>
Vec<typename Derived::Scalar> vech(const Eigen::MatrixBase<Derived>& m) {
  Vec<typename Derived::Scalar> out(vech_size(m.rows()));
  Index k = 0;
  for (Index c = 0; c < m.cols(); ++c)
    for (Index r = c; r < m.rows(); ++r) out(k++) = m(r, c);
  return out;
}

}  // namespace icmsim
