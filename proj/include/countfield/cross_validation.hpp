#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "countfield/counts.hpp"
#include "countfield/errors.hpp"
#include "countfield/grid.hpp"
#include "countfield/laplacian.hpp"
#include "countfield/model.hpp"
#include "countfield/optimizer.hpp"
#include "countfield/rng.hpp"

namespace countfield {

struct CvPlan {
  double holdout_fraction = 0.2;
  int num_splits = 5;
  std::vector<std::pair<double, double>> grid;  // (w_s, w_t) candidates
  std::uint64_t seed = 0;
  int num_workers = 1;

  /// 13x13 log-spaced grid, 1e-3 through 1e3 on both axes.
  static std::vector<std::pair<double, double>> default_grid() {
    std::vector<double> axis;
    for (int k = 0; k <= 12; ++k) axis.push_back(std::pow(10.0, -3.0 + 0.5 * k));
    std::vector<std::pair<double, double>> out;
    out.reserve(axis.size() * axis.size());
    for (double ws : axis)
      for (double wt : axis) out.emplace_back(ws, wt);
    return out;
  }

  void validate() const {
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
      throw ValidationError("CvPlan: holdout_fraction must lie in (0, 1)");
    if (num_splits < 1) throw ValidationError("CvPlan: num_splits must be at least 1");
    if (grid.empty()) throw ValidationError("CvPlan: weight grid is empty");
    for (const auto& [ws, wt] : grid)
      if (!(ws >= 0.0) || !(wt >= 0.0) || !std::isfinite(ws) || !std::isfinite(wt))
        throw ValidationError("CvPlan: weights must be finite and non-negative");
    if (num_workers < 1) throw ValidationError("CvPlan: num_workers must be at least 1");
  }
};

struct CvCell {
  double w_s = 0.0;
  double w_t = 0.0;
  double mean_score = 0.0;
  double std_score = 0.0;
  int diverged_splits = 0;
};

struct CvReport {
  std::vector<CvCell> cells;     // one per grid point, grid order
  int selected = -1;             // index into cells
  double selected_w_s = 0.0;
  double selected_w_t = 0.0;
  bool tie = false;
  std::string tie_note;
};

/// Splits counts into (train, holdout) by thinning: each of the x_i events
/// lands in the holdout with probability p, independently. The two parts sum
/// back to x exactly.
inline std::pair<CountVector, CountVector> thin_counts(const CountVector& x, double p,
                                                       Rng& rng) {
  if (!(p > 0.0 && p < 1.0))
    throw ValidationError("thin_counts: holdout fraction must lie in (0, 1)");
  std::vector<std::int64_t> train(x.size()), holdout(x.size());
  for (int i = 0; i < x.size(); ++i) {
    const std::int64_t held = rng.binomial(x[i], p);
    holdout[i] = held;
    train[i] = x[i] - held;
  }
  return {CountVector(x.layout(), std::move(train)),
          CountVector(x.layout(), std::move(holdout))};
}

/// Picks (w_s, w_t) by thinning cross-validation: for each split, fit on the
/// train part at every grid point, then score the holdout under the rescaled
/// fitted detector intensity p/(1-p) * h_train with the exact log-likelihood.
/// The grid point with the highest mean score wins; exact ties go to the
/// largest w_s * w_t, then to the earliest grid position.
template <typename LaplacianBuilder>
CvReport select_weights(const CountVector& x, const Eigen::VectorXd& psi,
                        const Eigen::SparseMatrix<double>& p_matrix,
                        LaplacianBuilder&& laplacian_for, const CvPlan& plan,
                        const OptimizerConfig& opt = {}) {
  plan.validate();
  opt.validate();
  if (psi.size() != p_matrix.cols())
    throw DimensionError("select_weights: psi length does not match P columns");
  if (static_cast<Eigen::Index>(x.size()) != p_matrix.rows())
    throw DimensionError("select_weights: counts length does not match P rows");

  const int num_points = static_cast<int>(plan.grid.size());
  const int num_splits = plan.num_splits;
  const double scale = plan.holdout_fraction / (1.0 - plan.holdout_fraction);

  std::vector<Laplacian> laps;
  laps.reserve(num_points);
  for (const auto& [ws, wt] : plan.grid) laps.push_back(laplacian_for(ws, wt));

  // thin once per split; the train-side initialization is shared across the grid
  std::vector<Eigen::VectorXd> train_x(num_splits), holdout_x(num_splits),
      theta0(num_splits);
  for (int s = 0; s < num_splits; ++s) {
    Rng rng = Rng::substream(plan.seed, static_cast<std::uint64_t>(s));
    auto [train, holdout] = thin_counts(x, plan.holdout_fraction, rng);
    train_x[s] = train.as_vector();
    holdout_x[s] = holdout.as_vector();
    theta0[s] = initialize_theta(train_x[s], p_matrix, psi, opt.init_floor);
  }

  // scores[point * num_splits + split]
  std::vector<double> scores(static_cast<std::size_t>(num_points) * num_splits);
  auto run_cell = [&](int point, int split) {
    double score = -std::numeric_limits<double>::infinity();
    try {
      const FitResult res = fit(theta0[split], psi, p_matrix, train_x[split],
                                laps[point], 1.0, opt);
      const Eigen::VectorXd h =
          scale * (p_matrix * (res.theta + psi).array().exp().matrix());
      score = exact_log_likelihood(holdout_x[split], h);
    } catch (const ValidationError&) {
      // diverged fit; recorded below as -inf
    }
    scores[static_cast<std::size_t>(point) * num_splits + split] = score;
  };

  const int workers = std::min(plan.num_workers, num_points);
  if (workers <= 1) {
    for (int point = 0; point < num_points; ++point)
      for (int s = 0; s < num_splits; ++s) run_cell(point, s);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int point = w; point < num_points; point += workers)
          for (int s = 0; s < num_splits; ++s) run_cell(point, s);
      });
    for (auto& t : pool) t.join();
  }

  CvReport report;
  report.cells.resize(num_points);
  for (int point = 0; point < num_points; ++point) {
    CvCell& cell = report.cells[point];
    cell.w_s = plan.grid[point].first;
    cell.w_t = plan.grid[point].second;
    double mean = 0.0;
    for (int s = 0; s < num_splits; ++s) {
      const double sc = scores[static_cast<std::size_t>(point) * num_splits + s];
      if (!std::isfinite(sc)) ++cell.diverged_splits;
      mean += sc;
    }
    mean /= num_splits;
    cell.mean_score = mean;
    double var = 0.0;
    if (num_splits > 1 && std::isfinite(mean)) {
      for (int s = 0; s < num_splits; ++s) {
        const double d = scores[static_cast<std::size_t>(point) * num_splits + s] - mean;
        var += d * d;
      }
      var /= (num_splits - 1);
    }
    cell.std_score = std::sqrt(var);
  }

  int best = -1;
  int num_tied = 0;
  for (int point = 0; point < num_points; ++point) {
    const CvCell& cell = report.cells[point];
    if (!std::isfinite(cell.mean_score)) continue;
    if (best < 0 || cell.mean_score > report.cells[best].mean_score) {
      best = point;
      num_tied = 1;
    } else if (cell.mean_score == report.cells[best].mean_score) {
      ++num_tied;
      if (cell.w_s * cell.w_t > report.cells[best].w_s * report.cells[best].w_t)
        best = point;
    }
  }
  if (best < 0)
    throw ValidationError("select_weights: every grid point diverged on some split");

  report.selected = best;
  report.selected_w_s = report.cells[best].w_s;
  report.selected_w_t = report.cells[best].w_t;
  if (num_tied > 1) {
    report.tie = true;
    report.tie_note = std::to_string(num_tied) +
                      " grid points tied on mean score; kept the largest w_s*w_t";
  }
  return report;
}

inline CvReport select_weights(const CountVector& x, const Eigen::VectorXd& psi,
                               const Eigen::SparseMatrix<double>& p_matrix,
                               const SourceGrid& grid, const AdjacencySpec& adjacency,
                               const CvPlan& plan, const OptimizerConfig& opt = {}) {
  return select_weights(
      x, psi, p_matrix,
      [&](double ws, double wt) { return build_laplacian(grid, adjacency, ws, wt); },
      plan, opt);
}

}  // namespace countfield
