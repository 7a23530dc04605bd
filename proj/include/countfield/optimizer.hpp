#pragma once

#include <Eigen/Core>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "countfield/errors.hpp"
#include "countfield/laplacian.hpp"
#include "countfield/model.hpp"

namespace countfield {

struct OptimizerConfig {
  int memory = 10;       // quasi-Newton history length
  int max_iters = 500;
  double grad_tol = 1e-6;  // infinity norm of the gradient
  double sufficient_decrease = 1e-4;
  double curvature = 0.9;
  double init_floor = 1e-4;
  int max_line_search = 50;

  void validate() const {
    if (memory <= 0) throw ValidationError("OptimizerConfig: memory must be positive");
    if (max_iters <= 0) throw ValidationError("OptimizerConfig: max_iters must be positive");
    if (grad_tol <= 0.0) throw ValidationError("OptimizerConfig: grad_tol must be positive");
    if (!(0.0 < sufficient_decrease && sufficient_decrease < curvature && curvature < 1.0))
      throw ValidationError(
          "OptimizerConfig: need 0 < sufficient_decrease < curvature < 1");
    if (init_floor <= 0.0) throw ValidationError("OptimizerConfig: init_floor must be positive");
  }
};

enum class Termination { converged, max_iters, line_search_failure };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::max_iters: return "max_iters";
    default: return "line_search_failure";
  }
}

struct FitResult {
  Eigen::VectorXd theta;
  Eigen::VectorXd intensity;  // exp(theta), strictly positive
  double objective = 0.0;
  int iterations = 0;
  double grad_inf_norm = 0.0;
  Termination termination = Termination::converged;
  std::vector<double> trace;  // objective at the start and after each accepted step
};

/// Least-squares initialization: eta0 = argmin |x - P eta|_2 via conjugate
/// gradient on the normal equations (minimum-norm solution from a zero
/// start). Non-convergence within the iteration budget falls back to
/// eta0 = P' x. The result is floored elementwise so its log is finite, and
/// theta0 = log(eta0) - psi.
inline Eigen::VectorXd initialize_theta(const Eigen::VectorXd& x,
                                        const Eigen::SparseMatrix<double>& p,
                                        const Eigen::VectorXd& psi,
                                        double floor = 1e-4) {
  if (floor <= 0.0) throw ValidationError("initialize_theta: floor must be positive");
  if (p.rows() != x.size())
    throw DimensionError("initialize_theta: P rows do not match x length");
  if (p.cols() != psi.size())
    throw DimensionError("initialize_theta: P columns do not match psi length");

  Eigen::LeastSquaresConjugateGradient<Eigen::SparseMatrix<double>> solver;
  solver.setTolerance(1e-10);
  solver.setMaxIterations(10 * static_cast<int>(p.cols()));
  solver.compute(p);
  Eigen::VectorXd eta0 = solver.solve(x);
  if (solver.info() != Eigen::Success) eta0 = p.transpose() * x;

  return (eta0.cwiseMax(floor).array().log() - psi.array()).matrix();
}

namespace detail {

/// Objective and gradient in one pass (one P and one P' product). When the
/// evaluation diverges the objective is +inf and the gradient is left zero.
struct ModelEval {
  const Eigen::VectorXd& psi;
  const Eigen::SparseMatrix<double>& p;
  const Eigen::VectorXd& x;
  const Laplacian& lap;
  double lambda;

  double operator()(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
    grad.setZero(theta.size());
    Eigen::ArrayXd sum = theta.array() + psi.array();
    for (int j = 0; j < sum.size(); ++j)
      if (!std::isfinite(sum[j])) return std::numeric_limits<double>::infinity();
    const Eigen::VectorXd eta = sum.exp().matrix();
    const Eigen::VectorXd h = p * eta;

    double nll = 0.0;
    Eigen::VectorXd r_minus_1(h.size());
    for (int i = 0; i < h.size(); ++i) {
      nll += h[i];
      if (x[i] > 0.0) {
        if (!(h[i] > 0.0)) return std::numeric_limits<double>::infinity();
        nll -= x[i] * std::log(h[i]);
        r_minus_1[i] = x[i] / h[i] - 1.0;
      } else {
        r_minus_1[i] = -1.0;
      }
    }
    if (!std::isfinite(nll)) return std::numeric_limits<double>::infinity();

    double obj = nll;
    Eigen::VectorXd ltheta;
    if (lambda > 0.0) {
      ltheta = lap.matrix * theta;
      obj += lambda * 0.5 * theta.dot(ltheta);
      if (!std::isfinite(obj)) return std::numeric_limits<double>::infinity();
    }

    grad = -(eta.array() * (p.transpose() * r_minus_1).array()).matrix();
    if (lambda > 0.0) grad += lambda * ltheta;
    return obj;
  }
};

}  // namespace detail

/// Minimizes the penalized objective over theta with limited-memory BFGS and
/// a strong-Wolfe bracketing line search. Deterministic: identical inputs and
/// config give bit-identical iterates.
inline FitResult fit(const Eigen::VectorXd& theta0, const Eigen::VectorXd& psi,
                     const Eigen::SparseMatrix<double>& p, const Eigen::VectorXd& x,
                     const Laplacian& lap, double lambda,
                     const OptimizerConfig& config = {}) {
  config.validate();
  if (lambda < 0.0) throw ValidationError("fit: lambda must be non-negative");
  if (p.rows() != x.size()) throw DimensionError("fit: P rows do not match x length");
  if (theta0.size() != psi.size() || theta0.size() != p.cols())
    throw DimensionError("fit: theta/psi/P shapes disagree");

  const detail::ModelEval eval{psi, p, x, lap, lambda};
  const int n = static_cast<int>(theta0.size());
  const double c1 = config.sufficient_decrease;
  const double c2 = config.curvature;

  Eigen::VectorXd theta = theta0;
  Eigen::VectorXd grad(n);
  double f = eval(theta, grad);
  if (!std::isfinite(f))
    throw ValidationError("fit: objective is not finite at the initial point");

  FitResult result;
  result.trace.push_back(f);

  std::vector<Eigen::VectorXd> s_hist, y_hist;
  std::vector<double> rho_hist;
  double gamma = 1.0;  // initial inverse-Hessian scale

  Eigen::VectorXd trial(n), trial_grad(n);
  int iter = 0;
  Termination reason = Termination::max_iters;

  for (; iter < config.max_iters; ++iter) {
    if (grad.lpNorm<Eigen::Infinity>() <= config.grad_tol) {
      reason = Termination::converged;
      break;
    }

    // two-loop recursion: d = -H grad
    Eigen::VectorXd d = -grad;
    const int k = static_cast<int>(s_hist.size());
    std::vector<double> alpha(k);
    for (int i = k - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(d);
      d -= alpha[i] * y_hist[i];
    }
    d *= gamma;
    for (int i = 0; i < k; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(d);
      d += (alpha[i] - beta) * s_hist[i];
    }

    double dg = d.dot(grad);
    if (!(dg < 0.0)) {  // not a descent direction; restart from steepest descent
      d = -grad;
      dg = -grad.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      gamma = 1.0;
    }

    // strong-Wolfe line search (bracket then zoom)
    const double f0 = f;
    const double dg0 = dg;
    double step = (iter == 0) ? std::min(1.0, 1.0 / std::max(1.0, grad.lpNorm<Eigen::Infinity>()))
                              : 1.0;
    double step_lo = 0.0, f_lo = f0, dg_lo = dg0;
    double step_hi = -1.0, f_hi = 0.0;  // step_hi < 0 means "not bracketed yet"
    double accepted = -1.0;
    double f_acc = f0;

    double prev_step = 0.0, prev_f = f0, prev_dg = dg0;
    bool zooming = false;
    for (int ls = 0; ls < config.max_line_search; ++ls) {
      if (zooming) {
        step = 0.5 * (step_lo + step_hi);
        if (std::fabs(step_hi - step_lo) < 1e-16 * std::max(1.0, std::fabs(step_lo))) break;
      }
      trial = theta + step * d;
      const double ft = eval(trial, trial_grad);
      const double dgt = std::isfinite(ft) ? trial_grad.dot(d) : 0.0;

      const bool decrease_ok = std::isfinite(ft) && ft <= f0 + c1 * step * dg0;
      if (!zooming) {
        if (!decrease_ok || (ls > 0 && ft >= prev_f)) {
          // bracket found between prev_step and step
          step_lo = prev_step; f_lo = prev_f; dg_lo = prev_dg;
          step_hi = step; f_hi = ft;
          zooming = true;
          continue;
        }
        if (std::fabs(dgt) <= -c2 * dg0) { accepted = step; f_acc = ft; break; }
        if (dgt >= 0.0) {
          step_lo = step; f_lo = ft; dg_lo = dgt;
          step_hi = prev_step; f_hi = prev_f;
          zooming = true;
          continue;
        }
        prev_step = step; prev_f = ft; prev_dg = dgt;
        step *= 2.0;
      } else {
        if (!decrease_ok || ft >= f_lo) {
          step_hi = step; f_hi = ft;
        } else {
          if (std::fabs(dgt) <= -c2 * dg0) { accepted = step; f_acc = ft; break; }
          if (dgt * (step_hi - step_lo) >= 0.0) { step_hi = step_lo; f_hi = f_lo; }
          step_lo = step; f_lo = ft; dg_lo = dgt;
        }
      }
    }
    (void)f_hi;
    (void)dg_lo;

    if (accepted < 0.0) {
      // no strong-Wolfe point; fall back to the best sufficient-decrease point
      if (zooming && step_lo > 0.0 && f_lo < f0) {
        trial = theta + step_lo * d;
        f_acc = eval(trial, trial_grad);
        accepted = step_lo;
      } else {
        reason = Termination::line_search_failure;
        break;
      }
    }

    // accept the step
    Eigen::VectorXd s = trial - theta;
    Eigen::VectorXd y = trial_grad - grad;
    theta.swap(trial);
    grad.swap(trial_grad);
    f = f_acc;
    result.trace.push_back(f);

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      gamma = sy / y_hist.back().squaredNorm();
      if (static_cast<int>(s_hist.size()) > config.memory) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho_hist.erase(rho_hist.begin());
      }
    }
  }

  if (reason == Termination::max_iters && iter >= config.max_iters &&
      grad.lpNorm<Eigen::Infinity>() <= config.grad_tol)
    reason = Termination::converged;

  result.theta = std::move(theta);
  result.intensity = result.theta.array().exp().matrix();
  result.objective = f;
  result.iterations = iter;
  result.grad_inf_norm = grad.lpNorm<Eigen::Infinity>();
  result.termination = reason;
  return result;
}

}  // namespace countfield
