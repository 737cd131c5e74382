#pragma once

#include "icmsim/types.hpp"

#include <cmath>
#include <limits>

namespace icmsim {

struct OptimizerOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;  ///< on the max-norm of the gradient
  double relative_tolerance = 1e-9;  ///< on |f_k - f_{k-1}| / max(1, |f_k|)
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 60;
};

struct OptimizerResult {
  VectorXd x;
  VectorXd gradient;
  double f = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

/// BFGS on the inverse Hessian with a backtracking Armijo line search.
///
/// `fg(x, g)` returns f(x) and writes the gradient into g; a non-finite return
/// marks x as infeasible and makes the line search shrink the step. A failed line
/// search resets the inverse Hessian once before giving up.
template <typename Objective>
OptimizerResult minimize_bfgs(Objective&& fg, const VectorXd& x0, const OptimizerOptions& opt = {}) {
  OptimizerResult res;
  const Index q = x0.size();
  res.x = x0;
  res.gradient = VectorXd::Zero(q);
  res.f = fg(res.x, res.gradient);
  if (!std::isfinite(res.f)) return res;
  if (q == 0 || res.gradient.cwiseAbs().maxCoeff() < opt.gradient_tolerance) {
    res.converged = true;
    return res;
  }

  MatrixXd h = MatrixXd::Identity(q, q);
  bool fresh = true;
  VectorXd x_new(q), g_new(q);
  while (res.iterations < opt.max_iterations) {
    VectorXd dir = -h * res.gradient;
    double slope = res.gradient.dot(dir);
    if (!(slope < 0.0)) {
      h.setIdentity();
      fresh = true;
      dir = -res.gradient;
      slope = -res.gradient.squaredNorm();
    }

    double step = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int b = 0; b < opt.max_backtracks; ++b, step *= opt.backtrack) {
      x_new = res.x + step * dir;
      f_new = fg(x_new, g_new);
      if (!std::isfinite(f_new)) continue;
      const bool armijo = f_new <= res.f + opt.armijo * step * slope;
      // Within rounding of f, a smaller gradient decides.
      const bool flat = std::abs(f_new - res.f) <= 1e-13 * std::max(1.0, std::abs(res.f)) &&
                        g_new.squaredNorm() < res.gradient.squaredNorm();
      if (armijo || flat) {
        accepted = true;
        break;
      }
    }
    ++res.iterations;
    if (!accepted) {
      if (res.gradient.cwiseAbs().maxCoeff() < opt.gradient_tolerance) {
        res.converged = true;
        break;
      }
      if (fresh) break;
      h.setIdentity();
      fresh = true;
      continue;
    }

    const VectorXd s = x_new - res.x;
    const VectorXd y = g_new - res.gradient;
    const double change = std::abs(f_new - res.f) / std::max(1.0, std::abs(f_new));
    res.x = x_new;
    res.f = f_new;
    res.gradient = g_new;
    if (res.gradient.cwiseAbs().maxCoeff() < opt.gradient_tolerance && change < opt.relative_tolerance) {
      res.converged = true;
      break;
    }

    const double sy = s.dot(y);
    if (sy > 1e-14 * s.norm() * y.norm()) {
      if (fresh) h *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const VectorXd hy = h * y;
      h += (rho * rho * y.dot(hy) + rho) * s * s.transpose() - rho * (hy * s.transpose() + s * hy.transpose());
      fresh = false;
    }
  }
  return res;
}

}  // namespace icmsim
