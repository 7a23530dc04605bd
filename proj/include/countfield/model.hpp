#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cmath>
#include <limits>

#include "countfield/errors.hpp"
#include "countfield/laplacian.hpp"

namespace countfield {

// The observation model. Target log intensity theta and population log
// intensity psi live on source bins; counts live on detector bins:
//
//   eta_j = exp(theta_j + psi_j)        event generation rate per source bin
//   h     = P * eta                     expected counts per detector bin
//   x_i ~ Poisson(h_i), independent
//
// The fitted objective is the negative log likelihood (its x! constant
// dropped) plus the graph smoothness penalty. Objective values are therefore
// comparable only for a fixed count vector x; exact_log_likelihood below keeps
// the constant for scores that must be comparable across count vectors.

inline void check_same_length(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                              const char* where) {
  if (a.size() != b.size()) throw DimensionError(std::string(where) + ": length mismatch");
}

/// eta_j = exp(theta_j + psi_j), elementwise.
inline Eigen::VectorXd link_eta(const Eigen::VectorXd& theta, const Eigen::VectorXd& psi) {
  check_same_length(theta, psi, "link_eta");
  for (int j = 0; j < theta.size(); ++j)
    if (!std::isfinite(theta[j]) || !std::isfinite(psi[j]))
      throw ValidationError("link_eta: non-finite input");
  return (theta + psi).array().exp().matrix();
}

/// h = P * eta. Column stochasticity of P conserves total mass.
inline Eigen::VectorXd detector_intensity(const Eigen::SparseMatrix<double>& p,
                                          const Eigen::VectorXd& eta) {
  if (p.cols() != eta.size())
    throw DimensionError("detector_intensity: P columns do not match eta length");
  return p * eta;
}

/// Poisson negative log likelihood of counts x under detector intensities h,
/// without the x! constant:  sum_i (h_i - x_i log h_i).
/// Returns +infinity when some h_i vanishes under a positive count (a
/// diverged evaluation, signalled rather than thrown so line searches can
/// back off). Bins with x_i = 0 contribute h_i, so an all-zero bin with
/// h_i = 0 contributes nothing.
inline double poisson_nll(const Eigen::VectorXd& x, const Eigen::VectorXd& h) {
  check_same_length(x, h, "poisson_nll");
  double nll = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    nll += h[i];
    if (x[i] > 0.0) {
      if (!(h[i] > 0.0)) return std::numeric_limits<double>::infinity();
      nll -= x[i] * std::log(h[i]);
    }
  }
  return std::isfinite(nll) ? nll : std::numeric_limits<double>::infinity();
}

/// Penalized objective: poisson_nll + lambda * 0.5 theta' L theta.
inline double objective(const Eigen::VectorXd& theta, const Eigen::VectorXd& psi,
                        const Eigen::SparseMatrix<double>& p, const Eigen::VectorXd& x,
                        const Laplacian& lap, double lambda) {
  if (lambda < 0.0) throw ValidationError("objective: lambda must be non-negative");
  const Eigen::VectorXd eta = link_eta(theta, psi);
  const double nll = poisson_nll(x, detector_intensity(p, eta));
  if (!std::isfinite(nll)) return nll;
  const double obj = nll + lambda * penalty(lap, theta);
  return std::isfinite(obj) ? obj : std::numeric_limits<double>::infinity();
}

/// Gradient of the objective:  lambda L theta - H P' (r - 1)
/// with r_i = x_i / h_i (taken as 0 where x_i = 0) and H = diag(eta).
inline Eigen::VectorXd gradient(const Eigen::VectorXd& theta, const Eigen::VectorXd& psi,
                                const Eigen::SparseMatrix<double>& p,
                                const Eigen::VectorXd& x, const Laplacian& lap,
                                double lambda) {
  if (lambda < 0.0) throw ValidationError("gradient: lambda must be non-negative");
  const Eigen::VectorXd eta = link_eta(theta, psi);
  const Eigen::VectorXd h = detector_intensity(p, eta);
  check_same_length(x, h, "gradient");

  Eigen::VectorXd r_minus_1(h.size());
  for (int i = 0; i < h.size(); ++i) {
    if (x[i] > 0.0) {
      if (!(h[i] > 0.0))
        throw ValidationError("gradient: zero intensity under a positive count");
      r_minus_1[i] = x[i] / h[i] - 1.0;
    } else {
      r_minus_1[i] = -1.0;
    }
  }

  Eigen::VectorXd grad = -(eta.array() * (p.transpose() * r_minus_1).array()).matrix();
  if (lambda > 0.0) grad += lambda * (lap.matrix * theta);
  return grad;
}

/// Exact Poisson log likelihood including the x! constant:
///   sum_i (x_i log h_i - h_i - lgamma(x_i + 1)).
/// Comparable across different count vectors, which the penalized objective
/// is not; used for held-out scoring. -infinity when h_i = 0 under x_i > 0.
inline double exact_log_likelihood(const Eigen::VectorXd& x, const Eigen::VectorXd& h) {
  check_same_length(x, h, "exact_log_likelihood");
  double ll = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    ll -= h[i];
    if (x[i] > 0.0) {
      if (!(h[i] > 0.0)) return -std::numeric_limits<double>::infinity();
      ll += x[i] * std::log(h[i]) - std::lgamma(x[i] + 1.0);
    }
  }
  return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
}

}  // namespace countfield
