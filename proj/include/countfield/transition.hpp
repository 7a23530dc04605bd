#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "countfield/errors.hpp"
#include "countfield/grid.hpp"

namespace countfield {

/// Probabilities that an event's location is precise / self-declared / missing.
struct KindFractions {
  double precise = 0.03;
  double self_declared = 0.47;
  double missing = 0.50;

  void validate() const {
    for (double e : {precise, self_declared, missing})
      if (e < 0.0 || e > 1.0)
        throw ValidationError("KindFractions: fraction outside [0,1]");
    if (std::fabs(precise + self_declared + missing - 1.0) > 1e-12)
      throw ValidationError("KindFractions: fractions must sum to 1");
  }
};

/// M(r,s) = Pr(user declares region r | event actually in region s).
/// Column-stochastic over declared regions.
struct MisDeclareMatrix {
  Eigen::MatrixXd m;

  static MisDeclareMatrix identity(int num_regions) {
    return {Eigen::MatrixXd::Identity(num_regions, num_regions)};
  }

  void validate() const {
    if (m.rows() != m.cols()) throw DimensionError("MisDeclareMatrix: not square");
    for (int s = 0; s < m.cols(); ++s) {
      double col = 0.0;
      for (int r = 0; r < m.rows(); ++r) {
        if (m(r, s) < 0.0 || m(r, s) > 1.0)
          throw ValidationError("MisDeclareMatrix: entry outside [0,1]");
        col += m(r, s);
      }
      if (std::fabs(col - 1.0) > 1e-12)
        throw ValidationError("MisDeclareMatrix: column " + std::to_string(s) +
                              " does not sum to 1");
    }
  }
};

/// Column-stochastic m x n transition matrix P(i,j) = Pr(detector i | source j).
struct TransitionMatrix {
  Eigen::SparseMatrix<double> p;  // column-major; column access is the hot path

  void validate() const {
    for (int j = 0; j < p.outerSize(); ++j) {
      double col = 0.0;
      for (Eigen::SparseMatrix<double>::InnerIterator it(p, j); it; ++it) {
        if (it.value() < 0.0 || it.value() > 1.0)
          throw ValidationError("TransitionMatrix: entry outside [0,1]");
        col += it.value();
      }
      if (std::fabs(col - 1.0) > 1e-12)
        throw ValidationError("TransitionMatrix: column " + std::to_string(j) +
                              " does not sum to 1");
    }
  }
};

struct DeclarePair {
  std::string declared;
  std::string actual;
  std::int64_t count = 1;
};

/// Estimate the mis-declare matrix from counted (declared, actual) region
/// observations with additive smoothing:
///   M(r,s) = (count(r,s) + a) / (sum_r' count(r',s) + a * |regions|).
inline MisDeclareMatrix estimate_misdeclare(const SourceGrid& grid,
                                            const std::vector<DeclarePair>& pairs,
                                            double smoothing = 0.5) {
  if (smoothing < 0.0) throw ValidationError("estimate_misdeclare: negative smoothing");
  const int R = grid.num_regions();
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(R, R);
  for (const auto& pair : pairs) {
    if (pair.count < 0) throw ValidationError("estimate_misdeclare: negative pair count");
    counts(grid.region_index(pair.declared), grid.region_index(pair.actual)) +=
        static_cast<double>(pair.count);
  }

  MisDeclareMatrix out;
  out.m.resize(R, R);
  for (int s = 0; s < R; ++s) {
    const double denom = counts.col(s).sum() + smoothing * R;
    if (denom <= 0.0)
      throw DegenerateColumnError("estimate_misdeclare: no observations for region '" +
                                  grid.region_code(s) + "' and smoothing is 0");
    out.m.col(s) = (counts.col(s).array() + smoothing) / denom;
  }
  return out;
}

inline MisDeclareMatrix estimate_misdeclare(
    const SourceGrid& grid,
    const std::vector<std::pair<std::string, std::string>>& pairs,
    double smoothing = 0.5) {
  std::vector<DeclarePair> counted;
  counted.reserve(pairs.size());
  for (const auto& [declared, actual] : pairs) counted.push_back({declared, actual, 1});
  return estimate_misdeclare(grid, counted, smoothing);
}

/// Assemble the three-kind transition matrix. For source (s,t):
///   precise detector (s,t)        gets eps1
///   self-declared detectors (r,t) get  eps2 * M(r,s)  for every r
///   no-location detector (t)      gets eps3
inline TransitionMatrix build_transition(const SourceGrid& grid,
                                         const DetectorLayout& layout,
                                         const KindFractions& frac,
                                         const MisDeclareMatrix& mis) {
  frac.validate();
  mis.validate();
  const int R = grid.num_regions();
  const int T = grid.time_slots();
  if (layout.num_regions() != R || layout.time_slots() != T)
    throw DimensionError("build_transition: layout does not match grid");
  if (mis.m.rows() != R)
    throw DimensionError("build_transition: mis-declare matrix does not match regions");

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(grid.size()) * (R + 2));
  for (int s = 0; s < R; ++s) {
    for (int t = 0; t < T; ++t) {
      const int j = grid.bin(s, t);
      if (frac.precise > 0.0) trips.emplace_back(layout.precise_bin(s, t), j, frac.precise);
      if (frac.self_declared > 0.0) {
        for (int r = 0; r < R; ++r) {
          const double v = frac.self_declared * mis.m(r, s);
          if (v > 0.0) trips.emplace_back(layout.self_declared_bin(r, t), j, v);
        }
      }
      if (frac.missing > 0.0) trips.emplace_back(layout.no_location_bin(t), j, frac.missing);
    }
  }

  TransitionMatrix out;
  out.p.resize(layout.size(), grid.size());
  out.p.setFromTriplets(trips.begin(), trips.end());
  out.p.makeCompressed();
  return out;
}

}  // namespace countfield
