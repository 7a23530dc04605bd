#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "countfield/errors.hpp"
#include "countfield/grid.hpp"

namespace countfield {

/// Region-level adjacency: unordered pairs of region codes, plus whether the
/// last time slot wraps around to the first (hour-of-day grids are periodic).
struct AdjacencySpec {
  std::vector<std::pair<std::string, std::string>> region_edges;
  bool temporal_wraparound = true;

  void validate(const SourceGrid& grid) const {
    for (const auto& [a, b] : region_edges) {
      if (a == b)
        throw ValidationError("AdjacencySpec: self-pair '" + a + "'");
      if (!grid.has_region(a))
        throw ValidationError("AdjacencySpec: unknown region '" + a + "'");
      if (!grid.has_region(b))
        throw ValidationError("AdjacencySpec: unknown region '" + b + "'");
    }
  }
};

/// Combinatorial Laplacian L = D - W of the spatio-temporal neighbor graph,
/// with spatial edge weight w_s and temporal edge weight w_t.
struct Laplacian {
  Eigen::SparseMatrix<double> matrix;  // n x n, symmetric
  double w_s = 0.0;
  double w_t = 0.0;
};

/// Builds the source-bin graph: temporal edges join (r,t)-(r,t+1) with weight
/// w_t (wrapping T-1 to 0 iff requested and T > 2); spatial edges join
/// (r,t)-(r',t) with weight w_s for every adjacent region pair {r,r'}.
inline Laplacian build_laplacian(const SourceGrid& grid, const AdjacencySpec& adj,
                                 double w_s, double w_t) {
  if (w_s <= 0.0 || w_t <= 0.0)
    throw ValidationError("build_laplacian: edge weights must be positive");
  adj.validate(grid);

  const int n = grid.size();
  const int T = grid.time_slots();
  std::vector<Eigen::Triplet<double>> trips;

  auto add_edge = [&trips](int j, int k, double w) {
    trips.emplace_back(j, j, w);
    trips.emplace_back(k, k, w);
    trips.emplace_back(j, k, -w);
    trips.emplace_back(k, j, -w);
  };

  for (int r = 0; r < grid.num_regions(); ++r) {
    for (int t = 0; t + 1 < T; ++t) add_edge(grid.bin(r, t), grid.bin(r, t + 1), w_t);
    // with T == 2 the wrap edge would duplicate the (0,1) edge just added
    if (adj.temporal_wraparound && T > 2) add_edge(grid.bin(r, T - 1), grid.bin(r, 0), w_t);
  }
  for (const auto& [a, b] : adj.region_edges) {
    const int ra = grid.region_index(a);
    const int rb = grid.region_index(b);
    for (int t = 0; t < T; ++t) add_edge(grid.bin(ra, t), grid.bin(rb, t), w_s);
  }

  Laplacian lap;
  lap.w_s = w_s;
  lap.w_t = w_t;
  lap.matrix.resize(n, n);
  lap.matrix.setFromTriplets(trips.begin(), trips.end());
  lap.matrix.makeCompressed();
  return lap;
}

/// Smoothness penalty 0.5 * theta' L theta  (== 0.5 * sum_edges w (th_j - th_k)^2).
inline double penalty(const Laplacian& lap, const Eigen::VectorXd& theta) {
  if (theta.size() != lap.matrix.rows())
    throw DimensionError("penalty: theta length does not match Laplacian");
  return 0.5 * theta.dot(lap.matrix * theta);
}

}  // namespace countfield
