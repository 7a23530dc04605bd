#include <catch2/catch_amalgamated.hpp>

#include "countfield/errors.hpp"
#include "countfield/grid.hpp"

using namespace countfield;

TEST_CASE("source grid validates its construction") {
  CHECK_THROWS_AS(SourceGrid({}, 24), ValidationError);
  CHECK_THROWS_AS(SourceGrid({"A", "B"}, 0), ValidationError);
  CHECK_THROWS_AS(SourceGrid({"A", "A"}, 4), ValidationError);  // duplicate code
}

TEST_CASE("bin indexing is a bijection onto [0, n)") {
  const SourceGrid grid({"A", "B", "C"}, 5);
  REQUIRE(grid.size() == 15);
  std::vector<bool> seen(grid.size(), false);
  for (int r = 0; r < grid.num_regions(); ++r)
    for (int t = 0; t < grid.time_slots(); ++t) {
      const int j = grid.bin(r, t);
      REQUIRE(j >= 0);
      REQUIRE(j < grid.size());
      REQUIRE_FALSE(seen[j]);
      seen[j] = true;
      const auto [rr, tt] = grid.region_slot(j);
      CHECK(rr == r);
      CHECK(tt == t);
    }
}

TEST_CASE("region lookup round-trips and rejects unknown codes") {
  const SourceGrid grid({"WA", "NY", "TX"}, 2);
  CHECK(grid.region_index("NY") == 1);
  CHECK(grid.region_code(1) == "NY");
  CHECK_THROWS_AS(grid.region_index("ZZ"), ValidationError);
  CHECK_THROWS_AS(grid.bin(3, 0), ValidationError);
  CHECK_THROWS_AS(grid.bin(0, 2), ValidationError);
  CHECK_THROWS_AS(grid.region_slot(-1), ValidationError);
}

TEST_CASE("detector layout splits into three kind blocks") {
  const SourceGrid grid({"A", "B"}, 3);
  const DetectorLayout layout(grid);
  REQUIRE(layout.size() == (2 * 2 + 1) * 3);
  CHECK(layout.kind2_offset() == 6);
  CHECK(layout.kind3_offset() == 12);
  CHECK(layout.kind_size(DetectorKind::precise) == 6);
  CHECK(layout.kind_size(DetectorKind::self_declared) == 6);
  CHECK(layout.kind_size(DetectorKind::no_location) == 3);

  CHECK(layout.precise_bin(1, 2) == 5);
  CHECK(layout.self_declared_bin(0, 1) == 7);
  CHECK(layout.no_location_bin(2) == 14);
}

TEST_CASE("every detector bin decodes to its kind, region and slot") {
  const DetectorLayout layout(4, 6);
  for (int i = 0; i < layout.size(); ++i) {
    const DetectorKind k = layout.kind_of(i);
    const int r = layout.region_of(i);
    const int t = layout.slot_of(i);
    REQUIRE(t >= 0);
    REQUIRE(t < 6);
    switch (k) {
      case DetectorKind::precise:
        CHECK(layout.precise_bin(r, t) == i);
        break;
      case DetectorKind::self_declared:
        CHECK(layout.self_declared_bin(r, t) == i);
        break;
      case DetectorKind::no_location:
        CHECK(r == -1);
        CHECK(layout.no_location_bin(t) == i);
        break;
    }
  }
}

TEST_CASE("detector bin accessors validate their arguments") {
  const DetectorLayout layout(2, 3);
  CHECK_THROWS_AS(layout.precise_bin(2, 0), ValidationError);
  CHECK_THROWS_AS(layout.self_declared_bin(0, 3), ValidationError);
  CHECK_THROWS_AS(layout.no_location_bin(-1), ValidationError);
  CHECK_THROWS_AS(layout.kind_of(layout.size()), ValidationError);
}
