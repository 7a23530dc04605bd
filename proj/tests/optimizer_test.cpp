#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "countfield/errors.hpp"
#include "countfield/grid.hpp"
#include "countfield/laplacian.hpp"
#include "countfield/model.hpp"
#include "countfield/optimizer.hpp"
#include "countfield/rng.hpp"

using namespace countfield;

namespace {

Eigen::SparseMatrix<double> sparse_identity(int n) {
  Eigen::SparseMatrix<double> p(n, n);
  p.setIdentity();
  return p;
}

Eigen::SparseMatrix<double> random_stochastic(int m, int n, Rng& rng) {
  Eigen::MatrixXd dense(m, n);
  for (int j = 0; j < n; ++j) {
    double col = 0.0;
    for (int i = 0; i < m; ++i) {
      dense(i, j) = rng.uniform() + 1e-3;
      col += dense(i, j);
    }
    dense.col(j) /= col;
  }
  return dense.sparseView();
}

Laplacian chain_laplacian(int n, double w) {
  const SourceGrid grid({"A"}, n);
  return build_laplacian(grid, {{}, false}, 1.0, w);
}

}  // namespace

TEST_CASE("initialization inverts an identity transition") {
  Eigen::VectorXd x(2), psi(2);
  x << 4.0, 9.0;
  psi << 0.0, 0.0;
  const Eigen::VectorXd theta0 = initialize_theta(x, sparse_identity(2), psi);
  CHECK(theta0[0] == Catch::Approx(std::log(4.0)).epsilon(1e-8));
  CHECK(theta0[1] == Catch::Approx(std::log(9.0)).epsilon(1e-8));
}

TEST_CASE("initialization floors empty bins instead of diverging") {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(3);
  const Eigen::VectorXd theta0 = initialize_theta(x, sparse_identity(3), psi);
  for (int j = 0; j < 3; ++j) CHECK(theta0[j] == Catch::Approx(std::log(1e-4)));
}

TEST_CASE("initialization subtracts the population offset") {
  Eigen::VectorXd x(1), psi(1);
  x << 6.0;
  psi << std::log(3.0);
  const Eigen::VectorXd theta0 = initialize_theta(x, sparse_identity(1), psi);
  CHECK(theta0[0] == Catch::Approx(std::log(6.0) - std::log(3.0)).epsilon(1e-8));
}

TEST_CASE("initialization recovers a consistent linear system") {
  Rng rng(41);
  const int n = 6, m = 10;
  const Eigen::SparseMatrix<double> p = random_stochastic(m, n, rng);
  Eigen::VectorXd eta(n);
  for (int j = 0; j < n; ++j) eta[j] = rng.uniform(0.5, 4.0);
  const Eigen::VectorXd x = p * eta;  // exactly consistent counts
  const Eigen::VectorXd psi = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd theta0 = initialize_theta(x, p, psi);
  for (int j = 0; j < n; ++j)
    CHECK(std::exp(theta0[j]) == Catch::Approx(eta[j]).epsilon(1e-6));
}

TEST_CASE("scalar fit lands on the closed-form MLE") {
  Eigen::VectorXd x(1), psi(1);
  x << 5.0;
  psi << 0.0;
  const Eigen::SparseMatrix<double> p = sparse_identity(1);
  const Laplacian lap = chain_laplacian(1, 1.0);
  OptimizerConfig config;
  config.grad_tol = 1e-9;
  const Eigen::VectorXd theta0 = initialize_theta(x, p, psi);
  const FitResult fit_result = fit(theta0, psi, p, x, lap, 0.0, config);
  CHECK(fit_result.termination == Termination::converged);
  CHECK(fit_result.theta[0] == Catch::Approx(std::log(5.0)).epsilon(1e-7));
  CHECK(fit_result.intensity[0] == Catch::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("two-source fit matches an exhaustive grid search") {
  // n = 2, m = 3, handmade transition, lambda = 0.5 and one temporal edge
  Eigen::SparseMatrix<double> p(3, 2);
  p.insert(0, 0) = 0.6;
  p.insert(1, 0) = 0.3;
  p.insert(2, 0) = 0.1;
  p.insert(0, 1) = 0.2;
  p.insert(1, 1) = 0.5;
  p.insert(2, 1) = 0.3;
  Eigen::VectorXd x(3), psi(2);
  x << 3.0, 7.0, 2.0;
  psi << 0.2, -0.1;
  const Laplacian lap = chain_laplacian(2, 1.0);
  const double lambda = 0.5;

  // two-stage funnel: coarse sweep of [-5,5]^2, then res 1e-3 around the hit
  const auto sweep = [&](double a_lo, double a_hi, double b_lo, double b_hi,
                         double res, Eigen::VectorXd& arg) {
    double best = std::numeric_limits<double>::infinity();
    for (double a = a_lo; a <= a_hi + 1e-12; a += res) {
      for (double b = b_lo; b <= b_hi + 1e-12; b += res) {
        Eigen::VectorXd theta(2);
        theta << a, b;
        const double obj = objective(theta, psi, p, x, lap, lambda);
        if (obj < best) {
          best = obj;
          arg = theta;
        }
      }
    }
    return best;
  };
  Eigen::VectorXd coarse(2), best_theta(2);
  sweep(-5.0, 5.0, -5.0, 5.0, 0.02, coarse);
  const double best = sweep(coarse[0] - 0.03, coarse[0] + 0.03, coarse[1] - 0.03,
                            coarse[1] + 0.03, 1e-3, best_theta);

  const Eigen::VectorXd theta0 = initialize_theta(x, p, psi);
  const FitResult fit_result = fit(theta0, psi, p, x, lap, lambda);
  CHECK(fit_result.termination == Termination::converged);
  CHECK(fit_result.objective <= best + 1e-9);
  CHECK(std::fabs(fit_result.theta[0] - best_theta[0]) < 1e-3);
  CHECK(std::fabs(fit_result.theta[1] - best_theta[1]) < 1e-3);
}

TEST_CASE("unpenalized identity-channel fit reproduces count over population") {
  Rng rng(42);
  const int n = 8;
  Eigen::VectorXd g(n), x(n);
  for (int j = 0; j < n; ++j) {
    g[j] = rng.uniform(0.5, 3.0);
    x[j] = static_cast<double>(1 + rng.poisson(6.0));
  }
  const Eigen::VectorXd psi = g.array().log().matrix();
  const Eigen::SparseMatrix<double> p = sparse_identity(n);
  OptimizerConfig config;
  config.grad_tol = 1e-10;
  const Eigen::VectorXd theta0 = initialize_theta(x, p, psi);
  const FitResult fit_result =
      fit(theta0, psi, p, x, chain_laplacian(n, 1.0), 0.0, config);
  REQUIRE(fit_result.termination == Termination::converged);
  for (int j = 0; j < n; ++j) {
    const double f_hat = std::exp(fit_result.theta[j]);
    CHECK(f_hat == Catch::Approx(x[j] / g[j]).epsilon(1e-6));
  }
}

TEST_CASE("penalty pulls neighboring estimates together") {
  // two bins sharing a temporal edge, very different raw counts
  Eigen::VectorXd x(2), psi(2);
  x << 1.0, 9.0;
  psi << 0.0, 0.0;
  const Eigen::SparseMatrix<double> p = sparse_identity(2);
  const Laplacian lap = chain_laplacian(2, 1.0);
  const Eigen::VectorXd theta0 = initialize_theta(x, p, psi);
  const FitResult loose = fit(theta0, psi, p, x, lap, 0.0);
  const FitResult tight = fit(theta0, psi, p, x, lap, 100.0);
  const double gap_loose = std::fabs(loose.theta[0] - loose.theta[1]);
  const double gap_tight = std::fabs(tight.theta[0] - tight.theta[1]);
  CHECK(gap_tight < 0.1 * gap_loose);
}

TEST_CASE("repeated fits are bit-identical") {
  Rng rng(43);
  const int n = 10, m = 14;
  const Eigen::SparseMatrix<double> p = random_stochastic(m, n, rng);
  Eigen::VectorXd x(m);
  for (int i = 0; i < m; ++i) x[i] = static_cast<double>(rng.poisson(4.0));
  const Eigen::VectorXd psi = Eigen::VectorXd::Zero(n);
  const Laplacian lap = chain_laplacian(n, 0.7);
  const Eigen::VectorXd theta0 = initialize_theta(x, p, psi);
  const FitResult a = fit(theta0, psi, p, x, lap, 0.3);
  const FitResult b = fit(theta0, psi, p, x, lap, 0.3);
  REQUIRE(a.theta.size() == b.theta.size());
  for (int j = 0; j < n; ++j) CHECK(a.theta[j] == b.theta[j]);
  CHECK(a.objective == b.objective);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("objective trace decreases monotonically") {
  Rng rng(44);
  const int n = 12, m = 20;
  const Eigen::SparseMatrix<double> p = random_stochastic(m, n, rng);
  Eigen::VectorXd x(m);
  for (int i = 0; i < m; ++i) x[i] = static_cast<double>(rng.poisson(5.0));
  const Eigen::VectorXd psi = Eigen::VectorXd::Zero(n);
  const Laplacian lap = chain_laplacian(n, 1.0);
  const Eigen::VectorXd theta0 = initialize_theta(x, p, psi);
  const FitResult fit_result = fit(theta0, psi, p, x, lap, 0.5);
  REQUIRE(fit_result.trace.size() >= 1);
  for (size_t k = 1; k < fit_result.trace.size(); ++k)
    CHECK(fit_result.trace[k] <= fit_result.trace[k - 1]);
  CHECK(fit_result.objective == Catch::Approx(fit_result.trace.back()));
  CHECK(fit_result.grad_inf_norm >= 0.0);
}

TEST_CASE("converged fits satisfy the gradient tolerance") {
  Rng rng(45);
  const int n = 6, m = 9;
  const Eigen::SparseMatrix<double> p = random_stochastic(m, n, rng);
  Eigen::VectorXd x(m);
  for (int i = 0; i < m; ++i) x[i] = static_cast<double>(1 + rng.poisson(3.0));
  const Eigen::VectorXd psi = Eigen::VectorXd::Zero(n);
  const Laplacian lap = chain_laplacian(n, 1.0);
  OptimizerConfig config;
  config.grad_tol = 1e-8;
  const Eigen::VectorXd theta0 = initialize_theta(x, p, psi);
  const FitResult fit_result = fit(theta0, psi, p, x, lap, 1.0, config);
  REQUIRE(fit_result.termination == Termination::converged);
  const Eigen::VectorXd g = gradient(fit_result.theta, psi, p, x, lap, 1.0);
  CHECK(g.lpNorm<Eigen::Infinity>() <= 1e-8);
  CHECK(fit_result.grad_inf_norm <= 1e-8);
}

TEST_CASE("iteration cap is honored and reported") {
  Rng rng(46);
  const int n = 20, m = 30;
  const Eigen::SparseMatrix<double> p = random_stochastic(m, n, rng);
  Eigen::VectorXd x(m);
  for (int i = 0; i < m; ++i) x[i] = static_cast<double>(rng.poisson(8.0));
  const Eigen::VectorXd psi = Eigen::VectorXd::Zero(n);
  OptimizerConfig config;
  config.max_iters = 2;
  config.grad_tol = 1e-14;
  const Eigen::VectorXd theta0 = initialize_theta(x, p, psi);
  const FitResult fit_result =
      fit(theta0, psi, p, x, chain_laplacian(n, 1.0), 0.4, config);
  CHECK(fit_result.termination == Termination::max_iters);
  CHECK(fit_result.iterations == 2);
}

TEST_CASE("configuration bounds are validated") {
  OptimizerConfig config;
  config.memory = 0;
  CHECK_THROWS_AS(config.validate(), ValidationError);
  config = {};
  config.grad_tol = 0.0;
  CHECK_THROWS_AS(config.validate(), ValidationError);
  config = {};
  config.sufficient_decrease = 0.95;  // must stay below curvature
  CHECK_THROWS_AS(config.validate(), ValidationError);
  config = {};
  CHECK_NOTHROW(config.validate());
}

TEST_CASE("non-finite starting objective is rejected") {
  Eigen::VectorXd x(1), psi(1), theta0(1);
  x << 3.0;
  psi << 0.0;
  theta0 << -1000.0;  // exp underflows to 0 under a positive count
  CHECK_THROWS_AS(fit(theta0, psi, sparse_identity(1), x, chain_laplacian(1, 1.0), 0.0),
                  ValidationError);
}
