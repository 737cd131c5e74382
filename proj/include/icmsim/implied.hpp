#pragma once

#include "icmsim/param_table.hpp"

namespace icmsim {

/// (I - B)^{-1} for a strictly lower-triangular B, via a unit-lower triangular solve.
template <typename Derived>
Mat<typename Derived::Scalar> structural_inverse(const Eigen::MatrixBase<Derived>& beta) {
  using Scalar = typename Derived::Scalar;
  const Index m = beta.rows();
  const Mat<Scalar> i_minus_b = Mat<Scalar>::Identity(m, m) - beta;
  return i_minus_b.template triangularView<Eigen::UnitLower>().solve(Mat<Scalar>::Identity(m, m));
}

/// Implied covariance of the constructs, (I-B)^{-1} Psi (I-B)^{-T}.
template <typename DerivedB, typename DerivedPsi>
Mat<typename DerivedB::Scalar> construct_covariance(const Eigen::MatrixBase<DerivedB>& beta,
                                                    const Eigen::MatrixBase<DerivedPsi>& psi) {
  const auto a = structural_inverse(beta);
  return a * psi * a.transpose();
}

/// Lambda (I-B)^{-1} Psi (I-B)^{-T} Lambda' + Theta.
template <typename DL, typename DB, typename DP, typename DT>
Mat<typename DL::Scalar> implied_covariance(const Eigen::MatrixBase<DL>& lambda,
                                            const Eigen::MatrixBase<DB>& beta,
                                            const Eigen::MatrixBase<DP>& psi,
                                            const Eigen::MatrixBase<DT>& theta) {
  using Scalar = typename DL::Scalar;
  const Mat<Scalar> c = construct_covariance(beta, psi);
  Mat<Scalar> sigma = lambda * c * lambda.transpose() + theta;
  return (sigma + sigma.transpose()) / Scalar(2);
}

/// Checks dimensions, finiteness and triangularity, then evaluates the implied covariance.
template <typename Scalar>
Mat<Scalar> implied_covariance(const ParamTable<Scalar>& t) {
  const Index p = t.lambda.rows(), m = t.lambda.cols();
  if (t.beta.rows() != m || t.beta.cols() != m || t.psi.rows() != m || t.psi.cols() != m ||
      t.theta.rows() != p || t.theta.cols() != p)
    throw std::invalid_argument("parameter table dimensions are inconsistent");
  if (!t.lambda.allFinite() || !t.beta.allFinite() || !t.psi.allFinite() || !t.theta.allFinite())
    throw NumericError("non-finite parameter value");
  for (Index r = 0; r < m; ++r)
    for (Index c = r; c < m; ++c)
      if (t.beta(r, c) != Scalar(0))
        throw std::invalid_argument("B is not strictly lower triangular in topological order");
  return implied_covariance(t.lambda, t.beta, t.psi, t.theta);
}

template <typename Scalar>
Mat<Scalar> construct_covariance(const ParamTable<Scalar>& t) {
  return construct_covariance(t.beta, t.psi);
}

}  // namespace icmsim
