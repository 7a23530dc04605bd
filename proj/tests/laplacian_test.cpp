#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "countfield/errors.hpp"
#include "countfield/grid.hpp"
#include "countfield/laplacian.hpp"
#include "countfield/rng.hpp"

using namespace countfield;

namespace {

/// Edge-sum form of the penalty: 0.5 * sum over edges of w * (theta_j - theta_k)^2,
/// with the edges enumerated independently of the matrix construction.
double edge_sum_penalty(const SourceGrid& grid, const AdjacencySpec& adj, double w_s,
                        double w_t, const Eigen::VectorXd& theta) {
  double sum = 0.0;
  const int T = grid.time_slots();
  auto add = [&](int j, int k, double w) {
    const double d = theta[j] - theta[k];
    sum += w * d * d;
  };
  for (int r = 0; r < grid.num_regions(); ++r) {
    for (int t = 0; t + 1 < T; ++t) add(grid.bin(r, t), grid.bin(r, t + 1), w_t);
    if (adj.temporal_wraparound && T > 2) add(grid.bin(r, T - 1), grid.bin(r, 0), w_t);
  }
  for (const auto& [a, b] : adj.region_edges) {
    const int ra = grid.region_index(a);
    const int rb = grid.region_index(b);
    for (int t = 0; t < T; ++t) add(grid.bin(ra, t), grid.bin(rb, t), w_s);
  }
  return 0.5 * sum;
}

}  // namespace

TEST_CASE("two adjacent regions with one slot give the elementary laplacian") {
  const SourceGrid grid({"A", "B"}, 1);
  const AdjacencySpec adj{{{"A", "B"}}, false};
  const Laplacian lap = build_laplacian(grid, adj, 1.0, 5.0);
  Eigen::MatrixXd dense = Eigen::MatrixXd(lap.matrix);
  Eigen::MatrixXd expected(2, 2);
  expected << 1.0, -1.0, -1.0, 1.0;
  CHECK((dense - expected).norm() == 0.0);
}

TEST_CASE("one temporal edge with unit weight penalizes half the squared gap") {
  const SourceGrid grid({"A"}, 2);
  const AdjacencySpec adj{{}, false};
  const Laplacian lap = build_laplacian(grid, adj, 1.0, 1.0);
  Eigen::VectorXd theta(2);
  theta << 1.0, 0.0;
  CHECK(penalty(lap, theta) == Catch::Approx(0.5));
}

TEST_CASE("chain of three slots matches the worked edge sum") {
  // theta = (0, 1, 3): edge gaps 1 and 2, penalty (1 + 4) / 2 = 2.5
  const SourceGrid grid({"A"}, 3);
  const AdjacencySpec adj{{}, false};
  const Laplacian lap = build_laplacian(grid, adj, 1.0, 1.0);
  Eigen::VectorXd theta(3);
  theta << 0.0, 1.0, 3.0;
  CHECK(penalty(lap, theta) == Catch::Approx(2.5));
}

TEST_CASE("constant theta costs nothing") {
  const SourceGrid grid({"A", "B", "C"}, 4);
  const AdjacencySpec adj{{{"A", "B"}, {"B", "C"}}, true};
  const Laplacian lap = build_laplacian(grid, adj, 2.0, 3.0);
  // dyadic constant: every product in L * theta is exact, so the row sums
  // cancel to exactly zero
  CHECK(penalty(lap, Eigen::VectorXd::Constant(grid.size(), 4.5)) == 0.0);
  const double near = penalty(lap, Eigen::VectorXd::Constant(grid.size(), 4.2));
  CHECK(std::fabs(near) < 1e-12);
}

TEST_CASE("matrix form equals the edge-sum form on random input") {
  const SourceGrid grid({"A", "B", "C", "D"}, 6);
  const AdjacencySpec adj{{{"A", "B"}, {"B", "C"}, {"C", "D"}, {"A", "D"}}, true};
  Rng rng(11);
  for (const auto& [w_s, w_t] : {std::pair{0.7, 1.3}, std::pair{3.0, 0.2}}) {
    const Laplacian lap = build_laplacian(grid, adj, w_s, w_t);
    Eigen::VectorXd theta(grid.size());
    for (int j = 0; j < theta.size(); ++j) theta[j] = rng.normal();
    const double via_matrix = penalty(lap, theta);
    const double via_edges = edge_sum_penalty(grid, adj, w_s, w_t, theta);
    CHECK(via_matrix == Catch::Approx(via_edges).epsilon(1e-10));
  }
}

TEST_CASE("constant shifts leave the penalty unchanged") {
  const SourceGrid grid({"A", "B"}, 4);
  const AdjacencySpec adj{{{"A", "B"}}, true};
  const Laplacian lap = build_laplacian(grid, adj, 0.5, 2.0);
  Rng rng(12);
  Eigen::VectorXd theta(grid.size());
  for (int j = 0; j < theta.size(); ++j) theta[j] = rng.normal();
  const double base = penalty(lap, theta);
  // theta + c rounds theta's low bits, so equality holds only to relative
  // precision
  for (const double c : {1.0, -3.0, 64.0})
    CHECK(penalty(lap, (theta.array() + c).matrix()) ==
          Catch::Approx(base).epsilon(1e-12));
}

TEST_CASE("doubling both weights doubles the penalty exactly") {
  const SourceGrid grid({"A", "B", "C"}, 3);
  const AdjacencySpec adj{{{"A", "B"}, {"A", "C"}}, true};
  Rng rng(13);
  Eigen::VectorXd theta(grid.size());
  for (int j = 0; j < theta.size(); ++j) theta[j] = rng.normal();
  const double p1 = penalty(build_laplacian(grid, adj, 0.7, 1.9), theta);
  const double p2 = penalty(build_laplacian(grid, adj, 1.4, 3.8), theta);
  CHECK(p2 == 2.0 * p1);
}

TEST_CASE("wraparound adds the closing temporal edge only for longer days") {
  const SourceGrid grid({"A"}, 4);
  Eigen::VectorXd theta(4);
  theta << 1.0, 0.0, 0.0, 0.0;
  const Laplacian open = build_laplacian(grid, {{}, false}, 1.0, 1.0);
  const Laplacian wrapped = build_laplacian(grid, {{}, true}, 1.0, 1.0);
  // the wrap edge (slot 3, slot 0) sees the gap 1 and adds 0.5 to the penalty
  CHECK(penalty(open, theta) == Catch::Approx(0.5));
  CHECK(penalty(wrapped, theta) == Catch::Approx(1.0));

  // with two slots the single temporal edge must not be duplicated by the wrap
  const SourceGrid two({"A"}, 2);
  Eigen::VectorXd pair(2);
  pair << 1.0, 0.0;
  CHECK(penalty(build_laplacian(two, {{}, true}, 1.0, 1.0), pair) ==
        penalty(build_laplacian(two, {{}, false}, 1.0, 1.0), pair));
}

TEST_CASE("adjacency validation rejects self pairs and unknown regions") {
  const SourceGrid grid({"A", "B"}, 2);
  AdjacencySpec self{{{"A", "A"}}, false};
  CHECK_THROWS_AS(self.validate(grid), ValidationError);
  AdjacencySpec unknown{{{"A", "Z"}}, false};
  CHECK_THROWS_AS(unknown.validate(grid), ValidationError);
  CHECK_THROWS_AS(build_laplacian(grid, unknown, 1.0, 1.0), ValidationError);
}

TEST_CASE("non-positive weights are rejected") {
  const SourceGrid grid({"A", "B"}, 2);
  const AdjacencySpec adj{{{"A", "B"}}, false};
  CHECK_THROWS_AS(build_laplacian(grid, adj, 0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(build_laplacian(grid, adj, 1.0, -2.0), ValidationError);
}

TEST_CASE("penalty checks dimensions") {
  const SourceGrid grid({"A"}, 3);
  const Laplacian lap = build_laplacian(grid, {{}, false}, 1.0, 1.0);
  CHECK_THROWS_AS(penalty(lap, Eigen::VectorXd::Zero(2)), DimensionError);
}

TEST_CASE("positive semidefinite witness on random vectors") {
  const SourceGrid grid({"A", "B", "C"}, 5);
  const AdjacencySpec adj{{{"A", "B"}, {"B", "C"}}, true};
  const Laplacian lap = build_laplacian(grid, adj, 1.7, 0.4);
  Rng rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd theta(grid.size());
    for (int j = 0; j < theta.size(); ++j) theta[j] = rng.normal(0.0, 3.0);
    CHECK(penalty(lap, theta) >= 0.0);
  }
}
