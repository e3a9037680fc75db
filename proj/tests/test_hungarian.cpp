#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mtmc/hungarian.hpp"
#include "mtmc/oracles.hpp"
#include "mtmc/rng.hpp"

#include <limits>

using namespace mtmc;

TEST_CASE("hand cases") {
  MatX m(2, 2);
  m << 0.9, 0.1, 0.2, 0.8;
  const auto a = solve_assignment_max(m);
  CHECK(a.col_of == std::vector<Index>{0, 1});
  CHECK(a.total == doctest::Approx(1.7));

  MatX one(1, 1);
  one << 0.7;
  const auto b = solve_assignment_max(one);
  CHECK(b.col_of == std::vector<Index>{0});
  CHECK(b.total == 0.7);
}

TEST_CASE("exact tie-break picks lowest (query, trajectory) indices") {
  MatX m = MatX::Constant(2, 2, 3.0);
  CHECK(solve_assignment_max(m).col_of == std::vector<Index>{0, 1});

  MatX r = MatX::Constant(2, 3, 1.0);
  CHECK(solve_assignment_max(r).col_of == std::vector<Index>{0, 1});
}

TEST_CASE("rectangular shapes match exactly min(rows, cols) entries") {
  Rng rng(3);
  MatX wide(2, 5), tall(5, 2);
  for (Index i = 0; i < wide.size(); ++i) wide.data()[i] = rng.uniform01();
  for (Index i = 0; i < tall.size(); ++i) tall.data()[i] = rng.uniform01();

  const auto w = solve_assignment_max(wide);
  int matched = 0;
  for (const Index c : w.col_of)
    if (c >= 0) ++matched;
  CHECK(matched == 2);

  const auto t = solve_assignment_max(tall);
  matched = 0;
  for (const Index c : t.col_of)
    if (c >= 0) ++matched;
  CHECK(matched == 2);
}

TEST_CASE("random matrices equal the permutation brute force exactly") {
  Rng rng(17);
  for (int c = 0; c < 1000; ++c) {
    const Index n = rng.uniform_int(1, 6);
    const Index m = rng.uniform_int(1, 6);
    MatX scores(n, m);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < m; ++j)
        scores(i, j) = c % 4 == 0
                           ? static_cast<double>(rng.uniform_int(-20, 20))
                           : rng.uniform(-10.0, 10.0);
    const auto got = solve_assignment_max(scores);
    CHECK(got.total == oracle::brute_force_assignment_max(scores));

    // The returned pairing is consistent with its own total.
    double replay = 0.0;
    std::vector<char> used(static_cast<std::size_t>(m), 0);
    for (Index r = 0; r < n; ++r) {
      const Index col = got.col_of[static_cast<std::size_t>(r)];
      if (col < 0) continue;
      CHECK_FALSE(used[static_cast<std::size_t>(col)]);
      used[static_cast<std::size_t>(col)] = 1;
      replay += scores(r, col);
    }
    CHECK(replay == got.total);
  }
}

TEST_CASE("min solver mirrors the max solver") {
  Rng rng(29);
  for (int c = 0; c < 100; ++c) {
    MatX costs(4, 4);
    for (Index i = 0; i < costs.size(); ++i)
      costs.data()[i] = rng.uniform(0.0, 9.0);
    const auto mn = solve_assignment_min(costs);
    CHECK(mn.total ==
          doctest::Approx(-oracle::brute_force_assignment_max(-costs))
              .epsilon(1e-12));
  }
}

TEST_CASE("non-finite scores are rejected") {
  MatX m(2, 2);
  m << 1.0, 2.0, std::numeric_limits<double>::quiet_NaN(), 0.0;
  CHECK_THROWS_AS(solve_assignment_max(m), DataError);
  m(1, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(solve_assignment_max(m), DataError);
}

TEST_CASE("empty matrix yields empty assignment") {
  const auto a = solve_assignment_max(MatX(0, 0));
  CHECK(a.col_of.empty());
  CHECK(a.total == 0.0);
}
