#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "countfield/counts.hpp"
#include "countfield/cross_validation.hpp"
#include "countfield/errors.hpp"
#include "countfield/grid.hpp"
#include "countfield/laplacian.hpp"
#include "countfield/optimizer.hpp"
#include "countfield/population.hpp"
#include "countfield/rng.hpp"
#include "countfield/transition.hpp"

namespace countfield {

using CentroidMap = std::map<std::string, std::pair<double, double>>;  // region -> (lat, lon)

struct GaussianComponent {
  std::string mode_region;
  double sigma = 8.0;  // spatial scale in centroid coordinate units
};

struct SyntheticSpec {
  GaussianComponent component_a{"WA", 9.0};
  GaussianComponent component_b{"NY", 7.0};
  double scale = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(component_a.sigma > 0.0) || !(component_b.sigma > 0.0))
      throw ValidationError("SyntheticSpec: component sigmas must be positive");
    if (!(scale > 0.0)) throw ValidationError("SyntheticSpec: scale must be positive");
  }
};

/// Ground truth: an equal mixture of two spatial Gaussians evaluated at region
/// centroids, constant over time slots. Strictly positive everywhere (a tiny
/// relative floor guards exp underflow at extreme distances).
inline Eigen::VectorXd generate_truth(const SyntheticSpec& spec, const SourceGrid& grid,
                                      const CentroidMap& centroids) {
  spec.validate();
  auto centroid_of = [&](const std::string& code) {
    auto it = centroids.find(code);
    if (it == centroids.end())
      throw ValidationError("generate_truth: no centroid for region " + code);
    return it->second;
  };
  const auto mu_a = centroid_of(spec.component_a.mode_region);
  const auto mu_b = centroid_of(spec.component_b.mode_region);

  Eigen::VectorXd f(grid.size());
  for (int r = 0; r < grid.num_regions(); ++r) {
    const auto c = centroid_of(grid.regions()[r]);
    const double da2 = (c.first - mu_a.first) * (c.first - mu_a.first) +
                       (c.second - mu_a.second) * (c.second - mu_a.second);
    const double db2 = (c.first - mu_b.first) * (c.first - mu_b.first) +
                       (c.second - mu_b.second) * (c.second - mu_b.second);
    const double mix =
        0.5 * std::exp(-da2 / (2.0 * spec.component_a.sigma * spec.component_a.sigma)) +
        0.5 * std::exp(-db2 / (2.0 * spec.component_b.sigma * spec.component_b.sigma));
    const double value = spec.scale * std::max(mix, 1e-12);
    for (int t = 0; t < grid.time_slots(); ++t) f[grid.bin(r, t)] = value;
  }
  return f;
}

/// Scale that makes sum_j(u_j * g_j) hit target_total when applied to u.
inline double calibrate_scale(const Eigen::VectorXd& u, const Eigen::VectorXd& g,
                              double target_total) {
  if (u.size() != g.size())
    throw DimensionError("calibrate_scale: intensity and population lengths differ");
  const double mass = u.dot(g);
  if (!(mass > 0.0))
    throw ValidationError("calibrate_scale: unscaled mass must be positive");
  if (!(target_total > 0.0))
    throw ValidationError("calibrate_scale: target total must be positive");
  return target_total / mass;
}

/// Independent Poisson draws per detector bin with mean h = P (f .* exp(psi)).
inline CountVector sample_counts(const DetectorLayout& layout, const Eigen::VectorXd& f,
                                 const Eigen::VectorXd& psi,
                                 const Eigen::SparseMatrix<double>& p,
                                 std::uint64_t seed) {
  if (f.size() != psi.size())
    throw DimensionError("sample_counts: f and psi lengths differ");
  if (p.cols() != f.size() || p.rows() != static_cast<Eigen::Index>(layout.size()))
    throw DimensionError("sample_counts: P shape does not match layout/f");
  const Eigen::VectorXd h = p * (f.array() * psi.array().exp()).matrix();
  Rng rng(seed);
  std::vector<std::int64_t> x(layout.size());
  for (int i = 0; i < layout.size(); ++i) x[i] = rng.poisson(h[i]);
  return CountVector(layout, std::move(x));
}

/// Synthetic self-declaration behavior for demos and the benchmark: partly
/// truthful, partly drawn to two attractor regions, partly spilled onto
/// geographic neighbors, with a uniform remainder.
struct MisDeclareProfile {
  double self_weight = 0.42;
  double attractor_a_weight = 0.12;  // e.g. a large media-heavy region
  double attractor_b_weight = 0.08;
  double neighbor_weight = 0.18;
  double uniform_weight = 0.20;
  std::string attractor_a = "CA";
  std::string attractor_b = "NY";

  void validate() const {
    const double sum = self_weight + attractor_a_weight + attractor_b_weight +
                       neighbor_weight + uniform_weight;
    if (std::fabs(sum - 1.0) > 1e-12)
      throw ValidationError("MisDeclareProfile: weights must sum to 1");
    for (double w : {self_weight, attractor_a_weight, attractor_b_weight,
                     neighbor_weight, uniform_weight})
      if (w < 0.0) throw ValidationError("MisDeclareProfile: weights must be non-negative");
  }
};

inline MisDeclareMatrix build_demo_misdeclare(const SourceGrid& grid,
                                              const AdjacencySpec& adjacency,
                                              const MisDeclareProfile& profile = {}) {
  profile.validate();
  const int num_regions = grid.num_regions();
  const int ia = grid.region_index(profile.attractor_a);
  const int ib = grid.region_index(profile.attractor_b);

  std::vector<std::vector<int>> neighbors(num_regions);
  for (const auto& [a, b] : adjacency.region_edges) {
    const int ra = grid.region_index(a);
    const int rb = grid.region_index(b);
    neighbors[ra].push_back(rb);
    neighbors[rb].push_back(ra);
  }

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(num_regions, num_regions);
  for (int s = 0; s < num_regions; ++s) {
    m(s, s) += profile.self_weight;
    m(ia, s) += profile.attractor_a_weight;
    m(ib, s) += profile.attractor_b_weight;
    if (neighbors[s].empty()) {
      m(s, s) += profile.neighbor_weight;
    } else {
      const double share = profile.neighbor_weight / neighbors[s].size();
      for (int r : neighbors[s]) m(r, s) += share;
    }
    for (int r = 0; r < num_regions; ++r)
      m(r, s) += profile.uniform_weight / num_regions;
  }
  MisDeclareMatrix mis{std::move(m)};
  mis.validate();
  return mis;
}

/// Synthetic population activity: log-normal size across regions times a
/// sinusoidal daily curve, scaled so the counts sum close to target_total.
inline std::vector<std::int64_t> generate_population_profile(const SourceGrid& grid,
                                                             double target_total,
                                                             double spread,
                                                             std::uint64_t seed) {
  if (!(target_total > 0.0))
    throw ValidationError("generate_population_profile: target total must be positive");
  if (!(spread >= 0.0))
    throw ValidationError("generate_population_profile: spread must be non-negative");
  const int num_regions = grid.num_regions();
  const int num_slots = grid.time_slots();
  Rng rng(seed);
  std::vector<double> base(num_regions);
  double raw_total = 0.0;
  for (int r = 0; r < num_regions; ++r) {
    base[r] = std::exp(spread * rng.normal());
    for (int t = 0; t < num_slots; ++t)
      raw_total += base[r] * (1.0 + 0.6 * std::sin(2.0 * std::numbers::pi * (t + 1.0) / num_slots));
  }
  const double scale = target_total / raw_total;
  std::vector<std::int64_t> z(grid.size());
  for (int r = 0; r < num_regions; ++r)
    for (int t = 0; t < num_slots; ++t) {
      const double mean =
          scale * base[r] * (1.0 + 0.6 * std::sin(2.0 * std::numbers::pi * (t + 1.0) / num_slots));
      z[grid.bin(r, t)] = static_cast<std::int64_t>(std::llround(mean));
    }
  return z;
}

struct BenchResult {
  std::uint64_t seed = 0;
  std::array<double, 6> relative_error{};  // estimators (i) through (vi)
  std::array<std::int64_t, 3> kind_totals{};
  int plug_in_zero_bins = 0;  // estimator (ii) bins with zero population
  double w_s = 0.0;
  double w_t = 0.0;
};

inline constexpr std::array<const char*, 6> kEstimatorLabels = {"i",  "ii", "iii",
                                                                "iv", "v",  "vi"};

inline double relative_error(const Eigen::VectorXd& f, const Eigen::VectorXd& f_hat) {
  if (f.size() != f_hat.size())
    throw DimensionError("relative_error: lengths differ");
  const double denom = f.squaredNorm();
  if (!(denom > 0.0)) throw ValidationError("relative_error: truth has zero norm");
  return (f - f_hat).squaredNorm() / denom;
}

/// All six recovery strategies on one generated dataset. The fitted ones
/// (iii through vi) share the supplied penalty weights.
inline BenchResult run_baselines(const Eigen::VectorXd& f, const CountVector& x,
                                 const std::vector<std::int64_t>& z1,
                                 const Eigen::VectorXd& psi,
                                 const Eigen::SparseMatrix<double>& p_full,
                                 const SourceGrid& grid, const AdjacencySpec& adjacency,
                                 const KindFractions& fractions,
                                 const MisDeclareMatrix& mis, double w_s, double w_t,
                                 const OptimizerConfig& opt = {}) {
  const int n = static_cast<int>(grid.size());
  const int num_regions = grid.num_regions();
  const int num_slots = grid.time_slots();
  if (static_cast<int>(z1.size()) != n)
    throw DimensionError("run_baselines: z1 length does not match the grid");
  if (psi.size() != n) throw DimensionError("run_baselines: psi length does not match the grid");

  BenchResult result;
  for (int k = 0; k < 3; ++k)
    result.kind_totals[k] = x.kind_total(static_cast<DetectorKind>(k + 1));
  result.w_s = w_s;
  result.w_t = w_t;

  const Eigen::VectorXd x1 = x.kind_as_vector(DetectorKind::precise);
  const Eigen::VectorXd x2 = x.kind_as_vector(DetectorKind::self_declared);
  const double eps1 = fractions.precise;
  const double eps2 = fractions.self_declared;

  // (i) precise counts over the total population
  double z_total = 0.0;
  for (std::int64_t v : z1) z_total += static_cast<double>(v);
  if (!(z_total > 0.0)) throw ValidationError("run_baselines: population total is zero");
  result.relative_error[0] = relative_error(f, x1 / (eps1 * z_total));

  // (ii) per-bin plug-in
  Eigen::VectorXd plug_in(n);
  for (int j = 0; j < n; ++j) {
    if (z1[j] > 0) {
      plug_in[j] = x1[j] / (eps1 * static_cast<double>(z1[j]));
    } else {
      plug_in[j] = 0.0;
      ++result.plug_in_zero_bins;
    }
  }
  result.relative_error[1] = relative_error(f, plug_in);

  const Laplacian lap = build_laplacian(grid, adjacency, w_s, w_t);
  auto fitted = [&](const Eigen::VectorXd& counts,
                    const Eigen::SparseMatrix<double>& p) {
    const Eigen::VectorXd theta0 = initialize_theta(counts, p, psi, opt.init_floor);
    return fit(theta0, psi, p, counts, lap, 1.0, opt).intensity;
  };

  // (iii) precise counts only, P = eps1 * I
  Eigen::SparseMatrix<double> p3(n, n);
  p3.setIdentity();
  p3 *= eps1;
  result.relative_error[2] = relative_error(f, fitted(x1, p3));

  // (iv) precise + self-declared counts taken at face value, P = (eps1+eps2) * I
  Eigen::SparseMatrix<double> p4(n, n);
  p4.setIdentity();
  p4 *= (eps1 + eps2);
  result.relative_error[3] = relative_error(f, fitted(x1 + x2, p4));

  // (v) stacked precise and self-declared blocks with the mis-declare model
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(n) +
                static_cast<std::size_t>(num_regions) * num_regions * num_slots);
  for (int j = 0; j < n; ++j) trips.emplace_back(j, j, eps1);
  for (int s = 0; s < num_regions; ++s)
    for (int r = 0; r < num_regions; ++r) {
      const double value = eps2 * mis.m(r, s);
      if (value == 0.0) continue;
      for (int t = 0; t < num_slots; ++t)
        trips.emplace_back(n + grid.bin(r, t), grid.bin(s, t), value);
    }
  Eigen::SparseMatrix<double> p5(2 * n, n);
  p5.setFromTriplets(trips.begin(), trips.end());
  Eigen::VectorXd x12(2 * n);
  x12 << x1, x2;
  result.relative_error[4] = relative_error(f, fitted(x12, p5));

  // (vi) everything through the full transition matrix
  result.relative_error[5] = relative_error(f, fitted(x.as_vector(), p_full));

  return result;
}

struct BenchConfig {
  SyntheticSpec truth;
  MisDeclareProfile misdeclare;
  KindFractions fractions;
  double target_total = 2192.0;  // expected event count across all kinds
  int num_seeds = 10;
  std::uint64_t base_seed = 1;
  CvPlan cv;          // grid may be left empty to use the default grid
  OptimizerConfig opt;
  double count_scale = 1.0;  // multiplies the truth after calibration
};

struct BenchSummary {
  std::vector<BenchResult> runs;
  std::array<double, 6> median_error{};
  std::array<double, 6> iqr_error{};
};

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw ValidationError("quantile: empty sample");
  const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

/// Full benchmark: calibrated truth, per-seed count generation, per-seed
/// weight selection on the full model, then all six estimators.
inline BenchSummary run_bench(const BenchConfig& config, const SourceGrid& grid,
                              const CentroidMap& centroids, const AdjacencySpec& adjacency,
                              const std::vector<std::int64_t>& population) {
  config.fractions.validate();
  if (config.num_seeds < 1) throw ValidationError("run_bench: num_seeds must be at least 1");

  const DetectorLayout layout(grid);
  Eigen::VectorXd psi(grid.size());
  {
    const PopulationField pop = PopulationField::from_counts(population);
    psi = pop.psi();
  }
  const Eigen::VectorXd g = psi.array().exp().matrix();

  SyntheticSpec spec = config.truth;
  spec.scale = 1.0;
  const Eigen::VectorXd u = generate_truth(spec, grid, centroids);
  spec.scale = calibrate_scale(u, g, config.target_total) * config.count_scale;
  const Eigen::VectorXd f = generate_truth(spec, grid, centroids);

  const MisDeclareMatrix mis = build_demo_misdeclare(grid, adjacency, config.misdeclare);
  const Eigen::SparseMatrix<double> p =
      build_transition(grid, layout, config.fractions, mis).p;

  CvPlan cv = config.cv;
  if (cv.grid.empty()) cv.grid = CvPlan::default_grid();

  BenchSummary summary;
  summary.runs.reserve(config.num_seeds);
  for (int k = 0; k < config.num_seeds; ++k) {
    const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(k);
    const CountVector x = sample_counts(layout, f, psi, p, seed);
    CvPlan per_seed = cv;
    per_seed.seed = seed;
    const CvReport report = select_weights(x, psi, p, grid, adjacency, per_seed, config.opt);
    BenchResult run =
        run_baselines(f, x, population, psi, p, grid, adjacency, config.fractions, mis,
                      report.selected_w_s, report.selected_w_t, config.opt);
    run.seed = seed;
    summary.runs.push_back(run);
  }

  for (int e = 0; e < 6; ++e) {
    std::vector<double> errs;
    errs.reserve(summary.runs.size());
    for (const BenchResult& run : summary.runs) errs.push_back(run.relative_error[e]);
    std::sort(errs.begin(), errs.end());
    summary.median_error[e] = quantile_sorted(errs, 0.5);
    summary.iqr_error[e] = quantile_sorted(errs, 0.75) - quantile_sorted(errs, 0.25);
  }
  return summary;
}

}  // namespace countfield
