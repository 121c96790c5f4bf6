#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "heurplan/gridworld.hpp"
#include "test_util.hpp"

using namespace heurplan;

TEST_CASE("generate is deterministic and keeps corners free") {
  for (auto kind : kAllKinds) {
    CAPTURE(to_string(kind));
    const GridMap a = generate(kind, 64, 64, 7);
    const GridMap b = generate(kind, 64, 64, 7);
    CHECK(a == b);
    CHECK(a.free({0, 0}));
    CHECK(a.free({0, 63}));
    CHECK(a.free({63, 0}));
    CHECK(a.free({63, 63}));
  }
  CHECK_FALSE(generate(EnvironmentKind::Forest, 64, 64, 1) == generate(EnvironmentKind::Forest, 64, 64, 2));
}

TEST_CASE("generate rejects maps smaller than 16") {
  CHECK_THROWS_AS(generate(EnvironmentKind::ShiftingGap, 15, 64, 0), std::invalid_argument);
  CHECK_THROWS_AS(generate(EnvironmentKind::Mazes, 64, 8, 0), std::invalid_argument);
  CHECK_NOTHROW(generate(EnvironmentKind::Mazes, 16, 16, 0));
}

TEST_CASE("generator parameters are range checked") {
  GeneratorParams p = default_params(EnvironmentKind::Forest, 64, 64);
  p.forest_density = 0.5;
  CHECK_THROWS(generate(EnvironmentKind::Forest, 64, 64, 0, p));
  p = default_params(EnvironmentKind::ShiftingGap, 64, 64);
  p.gap_width = 1;
  CHECK_THROWS(generate(EnvironmentKind::ShiftingGap, 64, 64, 0, p));
}

TEST_CASE("shifting gap has one wall band with one opening") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const GridMap m = generate(EnvironmentKind::ShiftingGap, 64, 64, seed);
    // Columns containing any obstacle form one contiguous band.
    std::vector<int> wall_cols;
    for (int c = 0; c < 64; ++c) {
      bool any = false;
      for (int r = 0; r < 64; ++r) any |= m.occupied(r, c);
      if (any) wall_cols.push_back(c);
    }
    REQUIRE_FALSE(wall_cols.empty());
    CHECK(wall_cols.back() - wall_cols.front() + 1 == static_cast<int>(wall_cols.size()));
    // Every band column has the same single run of free rows.
    for (int c : wall_cols) {
      int runs = 0;
      for (int r = 0; r < 64; ++r)
        if (m.free({r, c}) && (r == 0 || m.occupied(r - 1, c))) ++runs;
      CHECK(runs == 1);
    }
  }
}

TEST_CASE("forest density stays within [5%, 30%] over 100 seeds") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const GridMap m = generate(EnvironmentKind::Forest, 64, 64, seed);
    const double density = static_cast<double>(m.occupied_count()) / (64.0 * 64.0);
    CHECK(density >= 0.05);
    CHECK(density <= 0.30);
  }
}

TEST_CASE("successors") {
  const GridMap m(8, 8);
  const auto interior = successors(m, {3, 3});
  REQUIRE(interior.size() == 8);
  int ortho = 0, diag = 0;
  for (const auto& e : interior) {
    if (e.cost == 1.0) ++ortho;
    if (e.cost == kSqrt2) ++diag;
  }
  CHECK(ortho == 4);
  CHECK(diag == 4);
  CHECK(successors(m, {0, 0}).size() == 3);
  CHECK(successors(m, {0, 4}).size() == 5);

  // Straight orthogonal path over 3 cells.
  double total = 0.0;
  for (const auto& e : successors(m, {2, 2}))
    if (e.to == Cell{2, 3}) total += e.cost;
  for (const auto& e : successors(m, {2, 3}))
    if (e.to == Cell{2, 4}) total += e.cost;
  CHECK(total == 2.0);
}

TEST_CASE("is_valid looks only at the destination") {
  GridMap m(5, 5);
  m.set(1, 2, true);
  m.set(2, 1, true);
  CHECK(is_valid(m, {{2, 2}, {2, 3}, 1.0}));
  CHECK_FALSE(is_valid(m, {{2, 2}, {1, 2}, 1.0}));
  // Diagonal squeeze between the two obstacles is allowed.
  CHECK(is_valid(m, {{2, 2}, {1, 1}, kSqrt2}));
}

TEST_CASE("obstacle_distance small cases") {
  GridMap m(6, 6);
  m.set(2, 2, true);
  const CostField d = obstacle_distance(m);
  CHECK(d(2, 4) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(d(3, 3) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(d(2, 2) == 0.0);

  const CostField empty = obstacle_distance(GridMap(3, 4));
  for (double x : empty.data()) CHECK(x == doctest::Approx(5.0));
}

TEST_CASE("obstacle_distance matches brute force on random maps") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const int h = 4 + static_cast<int>(rng() % 29), w = 4 + static_cast<int>(rng() % 29);
    const GridMap m = test::random_map(h, w, 0.05 + 0.3 * (trial % 5) / 4.0, rng());
    if (m.occupied_count() == 0) continue;
    const CostField fast = obstacle_distance(m);
    const CostField slow = test::brute_obstacle_distance(m);
    for (std::size_t i = 0; i < fast.size(); ++i) CHECK(std::abs(fast.data()[i] - slow.data()[i]) <= 1e-9);
  }
}

TEST_CASE("goal_distance") {
  const CostField d = goal_distance(8, 8, {0, 0});
  CHECK(d(3, 4) == doctest::Approx(5.0));
  CHECK(d(0, 0) == 0.0);
  const CostField c = goal_distance(9, 9, {4, 4});
  CHECK(c(1, 4) == c(7, 4));
  CHECK(c(4, 1) == c(4, 7));
  CHECK(c(2, 3) == c(6, 5));
}

TEST_CASE("build_features") {
  const GridMap empty(16, 16);
  const FeatureStack fs = build_features(empty, {5, 6});
  for (double x : fs.channels[0].data()) CHECK(x == 0.0);
  CHECK(fs.channels[2](5, 6) == 0.0);

  const GridMap m = generate(EnvironmentKind::MultipleBugtraps, 32, 32, 3);
  const FeatureStack f2 = build_features(m, {31, 31});
  for (const auto& ch : f2.channels)
    for (double x : ch.data()) {
      CHECK(x >= 0.0);
      CHECK(x <= 1.0);
    }

  GridMap blocked(16, 16);
  blocked.set(3, 3, true);
  CHECK_THROWS(build_features(blocked, {3, 3}));
}

TEST_CASE("translate_augment") {
  const GridMap m = generate(EnvironmentKind::Forest, 201, 201, 5);
  const FeatureStack fs = build_features(m, {200, 200});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Placement p = translate_augment(fs, 224, 224, seed);
    CHECK(p.offset.row >= 0);
    CHECK(p.offset.row <= 23);
    CHECK(p.offset.col >= 0);
    CHECK(p.offset.col <= 23);
    CHECK(p.features.height() == 224);
    CHECK(p.features.goal == Cell{200 + p.offset.row, 200 + p.offset.col});
  }

  const GridMap small = generate(EnvironmentKind::SingleBugtrap, 32, 32, 1);
  const FeatureStack sf = build_features(small, {31, 31});
  const Placement origin = place_features(sf, 40, 40, {0, 0});
  for (int ch = 0; ch < kFeatureChannels; ++ch)
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 32; ++c) CHECK(origin.features.channels[ch](r, c) == sf.channels[ch](r, c));
  for (int r = 0; r < 40; ++r)
    for (int c = 0; c < 40; ++c)
      if (r >= 32 || c >= 32) {
        CHECK(origin.features.channels[0](r, c) == 1.0);
        CHECK(origin.features.channels[1](r, c) == 0.0);
      }

  // Content preserved under any offset.
  const Placement shifted = place_features(sf, 40, 40, {5, 3});
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c)
      for (int ch = 0; ch < kFeatureChannels; ++ch)
        CHECK(shifted.features.channels[ch](r + 5, c + 3) == sf.channels[ch](r, c));
  CHECK(shifted.features.channels[2](36, 34) == doctest::Approx(0.0));

  CHECK_THROWS(translate_augment(sf, 16, 40, 0));
}

TEST_CASE("PGM round trip is bit exact") {
  for (auto kind : kAllKinds) {
    const GridMap m = generate(kind, 20 + static_cast<int>(kind), 33, 9);
    std::ostringstream a;
    write_pgm(a, m);
    std::istringstream in(a.str());
    const GridMap back = read_pgm(in);
    CHECK(back == m);
    std::ostringstream b;
    write_pgm(b, back);
    CHECK(a.str() == b.str());
  }
}

TEST_CASE("PGM reader rejects malformed input") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return read_pgm(in);
  };
  CHECK_THROWS_AS(parse("P5\n2 2\n1\n0 0 0 0\n"), FormatError);
  CHECK_THROWS_AS(parse("P2\n2 2\n255\n0 0 0 0\n"), FormatError);
  CHECK_THROWS_AS(parse("P2\n2 2\n1\n0 0 0\n"), FormatError);
  CHECK_THROWS_AS(parse("P2\n2 2\n1\n0 2 0 0\n"), FormatError);
  CHECK(parse("P2\n# comment\n2 1\n1\n0 1\n").occupied(0, 1));
}

TEST_CASE("manifest lines") {
  const ManifestEntry e{"maps/forest_0003.pgm", EnvironmentKind::Forest, 42, 64, 48};
  const std::string line = manifest_line(e);
  CHECK(line == R"({"path":"maps/forest_0003.pgm","kind":"forest","seed":42,"size":[64,48]})");
  const ManifestEntry back = parse_manifest_line(line);
  CHECK(back.path == e.path);
  CHECK(back.kind == e.kind);
  CHECK(back.seed == 42);
  CHECK(back.height == 64);
  CHECK(back.width == 48);
  CHECK_THROWS_AS(parse_manifest_line("{\"path\":1}"), FormatError);
}
