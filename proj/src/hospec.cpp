#include "icmsim/hospec.hpp"

#include "icmsim/linalg.hpp"

#include <cmath>
#include <random>

namespace icmsim {

Index HospecBlock::num_free() const {
  Index n = lambda_free.count();
  for (Index c = 0; c < k; ++c)
    for (Index r = c; r < k; ++r) n += psi_free(r, c) ? 1 : 0;
  return n;
}

namespace {

HospecBlock block_pattern(Index k, CompositeScaling scaling) {
  HospecBlock b;
  b.k = k;
  b.scaling = scaling;
  b.lambda = MatrixXd::Zero(k, k);
  b.lambda_free = BoolMatrix::Constant(k, k, false);
  b.psi = MatrixXd::Zero(k, k);
  b.psi_free = BoolMatrix::Constant(k, k, false);
  b.theta = MatrixXd::Zero(k, k);

  if (k == 1) {
    // Single indicator: x = eta, so one of loading and variance carries the scale.
    if (scaling == CompositeScaling::Variance) {
      b.lambda_free(0, 0) = true;
      b.lambda(0, 0) = 1.0;
      b.psi(0, 0) = 1.0;
    } else {
      b.lambda(0, 0) = 1.0;
      b.psi_free(0, 0) = true;
      b.psi(0, 0) = 1.0;
    }
    return b;
  }

  for (Index i = 0; i < k; ++i) {
    b.lambda_free(i, 0) = true;
    b.lambda(i, 0) = 1.0;
  }
  if (scaling == CompositeScaling::Variance) {
    b.psi(0, 0) = 1.0;
  } else {
    b.lambda_free(0, 0) = false;
    b.psi_free(0, 0) = true;
    b.psi(0, 0) = 1.0;
  }
  for (Index j = 1; j < k; ++j) {
    b.lambda_free(j - 1, j) = true;
    b.lambda(j - 1, j) = 0.1;
    b.lambda(j, j) = kExcrescentAnchor;
    for (Index i = j; i < k; ++i) b.psi_free(i, j) = true;
    b.psi(j, j) = 1.0;
  }
  return b;
}

// Free parameters of the block in a fixed order: lambda column-major, then the psi lower triangle.
VectorXd pack(const HospecBlock& b, const MatrixXd& lambda, const MatrixXd& psi) {
  std::vector<double> v;
  for (Index c = 0; c < b.k; ++c)
    for (Index r = 0; r < b.k; ++r)
      if (b.lambda_free(r, c)) v.push_back(lambda(r, c));
  for (Index c = 0; c < b.k; ++c)
    for (Index r = c; r < b.k; ++r)
      if (b.psi_free(r, c)) v.push_back(psi(r, c));
  return Eigen::Map<VectorXd>(v.data(), static_cast<Index>(v.size()));
}

void unpack(const HospecBlock& b, const VectorXd& v, MatrixXd& lambda, MatrixXd& psi) {
  Index k = 0;
  for (Index c = 0; c < b.k; ++c)
    for (Index r = 0; r < b.k; ++r)
      if (b.lambda_free(r, c)) lambda(r, c) = v(k++);
  for (Index c = 0; c < b.k; ++c)
    for (Index r = c; r < b.k; ++r)
      if (b.psi_free(r, c)) psi(r, c) = psi(c, r) = v(k++);
}

}  // namespace

Index saturation_rank(const HospecBlock& block) {
  // Generic point: random loadings and a random positive definite excrescent covariance.
  std::mt19937_64 rng(20231117);
  std::uniform_real_distribution<double> u(0.3, 1.2);
  MatrixXd lambda = block.lambda;
  MatrixXd psi = block.psi;
  for (Index c = 0; c < block.k; ++c)
    for (Index r = 0; r < block.k; ++r)
      if (block.lambda_free(r, c)) lambda(r, c) = u(rng);
  if (block.k > 1) {
    MatrixXd a(block.k - 1, block.k - 1);
    for (Index i = 0; i < a.size(); ++i) a(i) = u(rng) - 0.75;
    psi.bottomRightCorner(block.k - 1, block.k - 1) =
        a * a.transpose() + MatrixXd::Identity(block.k - 1, block.k - 1);
  }
  if (block.psi_free(0, 0)) psi(0, 0) = u(rng);

  const VectorXd theta0 = pack(block, lambda, psi);
  const Index q = theta0.size();
  const Index rows = vech_size(block.k);
  MatrixXd jac(rows, q);
  const double h = 1e-6;
  for (Index j = 0; j < q; ++j) {
    VectorXd tp = theta0, tm = theta0;
    tp(j) += h;
    tm(j) -= h;
    MatrixXd lp = lambda, pp = psi, lm = lambda, pm = psi;
    unpack(block, tp, lp, pp);
    unpack(block, tm, lm, pm);
    jac.col(j) = (vech(MatrixXd(lp * pp * lp.transpose())) - vech(MatrixXd(lm * pm * lm.transpose()))) /
                 (2 * h);
  }
  Eigen::JacobiSVD<MatrixXd> svd(jac);
  const VectorXd sv = svd.singularValues();
  if (sv.size() == 0) return 0;
  const double tol = 1e-7 * std::max(1.0, sv(0));
  return (sv.array() > tol).count();
}

HospecBlock build_hospec(Index k, CompositeScaling scaling) {
  if (k < 1) throw std::invalid_argument("composite block needs at least one indicator");
  HospecBlock b = block_pattern(k, scaling);
  const Index rank = saturation_rank(b);
  if (rank != vech_size(k))
    throw NumericError("composite block audit failed: covariance rank " + std::to_string(rank) +
                       " != " + std::to_string(vech_size(k)));
  return b;
}

double condition_number(const MatrixXd& m) {
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const VectorXd sv = svd.singularValues();
  if (sv.size() == 0) return 1.0;
  const double smin = sv(sv.size() - 1);
  return smin > 0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
}

VectorXd recover_weights(const MatrixXd& lambda_hat) {
  if (lambda_hat.rows() != lambda_hat.cols() || lambda_hat.rows() == 0)
    throw std::invalid_argument("composite loading matrix must be square");
  if (!lambda_hat.allFinite() || !(condition_number(lambda_hat) < 1e12))
    throw NumericError("composite loading matrix is singular");
  const MatrixXd inv = lambda_hat.partialPivLu().inverse();
  return inv.row(0).transpose();
}

HospecValues hospec_values(const MatrixXd& sxx, const VectorXd& w) {
  const Index k = sxx.rows();
  HospecValues v;
  v.lambda = MatrixXd::Zero(k, k);
  v.psi = MatrixXd::Zero(k, k);
  const VectorXd lam = sxx * w;
  v.lambda.col(0) = lam;
  v.psi(0, 0) = 1.0;
  if (k == 1) return v;
  // Excrescent columns orthogonal to w, so w is the composite row of Lambda^{-1}.
  for (Index j = 1; j < k; ++j) {
    if (w(j - 1) == 0.0) throw NumericError("zero composite weight");
    v.lambda(j - 1, j) = -kExcrescentAnchor * w(j) / w(j - 1);
    v.lambda(j, j) = kExcrescentAnchor;
  }
  const MatrixXd l_nu = v.lambda.rightCols(k - 1);
  const MatrixXd pinv = (l_nu.transpose() * l_nu).ldlt().solve(l_nu.transpose());
  MatrixXd phi = pinv * (sxx - lam * lam.transpose()) * pinv.transpose();
  v.psi.bottomRightCorner(k - 1, k - 1) = (phi + phi.transpose()) / 2;
  return v;
}

HospecValues hospec_start_values(const MatrixXd& s_block, CompositeScaling scaling) {
  const Index k = s_block.rows();
  HospecValues v;
  v.lambda = MatrixXd::Zero(k, k);
  v.psi = MatrixXd::Zero(k, k);
  VectorXd w0 = VectorXd::Ones(k);
  const double var = w0.dot(s_block * w0);
  w0 /= std::sqrt(std::max(var, 1e-12));
  v.lambda.col(0) = s_block * w0;
  v.psi(0, 0) = 1.0;
  if (scaling == CompositeScaling::FirstLoading && std::abs(v.lambda(0, 0)) > 1e-8) {
    const double s = v.lambda(0, 0);
    v.lambda.col(0) /= s;
    v.psi(0, 0) = s * s;
  }
  if (k == 1) {
    v.lambda(0, 0) = scaling == CompositeScaling::FirstLoading ? 1.0 : std::sqrt(s_block(0, 0));
    v.psi(0, 0) = scaling == CompositeScaling::FirstLoading ? s_block(0, 0) : 1.0;
    return v;
  }
  for (Index j = 1; j < k; ++j) {
    v.lambda(j - 1, j) = 0.1;
    v.lambda(j, j) = kExcrescentAnchor;
  }
  const Eigen::PartialPivLU<MatrixXd> lu(v.lambda);
  const MatrixXd rotated = lu.solve(lu.solve(s_block).transpose());
  for (Index j = 1; j < k; ++j) v.psi(j, j) = std::max(rotated(j, j), 0.05);
  return v;
}

}  // namespace icmsim
