#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "nvlab/geometry.hpp"
#include "nvlab/rng.hpp"

using namespace nvlab;

TEST_CASE("box domain basics") {
  BoxDomain b({2.0, 3.0});
  CHECK(b.dim() == 2);
  CHECK(b.volume() == doctest::Approx(6.0));
  const double in[2] = {1.0, 2.9};
  const double out[2] = {1.0, 3.1};
  CHECK(b.contains(std::span<const double>(in, 2)));
  CHECK_FALSE(b.contains(std::span<const double>(out, 2)));
  CHECK_THROWS_AS(BoxDomain({1.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(BoxDomain(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("sym is order-forgetting") {
  BoxDomain b({1.0});
  Configuration a = sym(b, {{0.2}, {0.7}});
  Configuration c = sym(b, {{0.7}, {0.2}});
  CHECK(a == c);

  Configuration single = sym(b, {{0.5}});
  CHECK(single.size() == 1);

  CHECK_THROWS_AS(sym(b, {{0.3}, {0.3}}), std::invalid_argument);
  CHECK_THROWS_AS(sym(b, {{1.5}}), std::invalid_argument);
}

TEST_CASE("sym invariant under random permutations") {
  Rng rng(11);
  BoxDomain b({4.0, 4.0});
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 6; ++i) pts.push_back({rng.uniform(0, 4), rng.uniform(0, 4)});
    Configuration base = sym(b, pts);
    for (int p = 0; p < 5; ++p) {
      auto shuffled = pts;
      for (std::size_t i = shuffled.size(); i > 1; --i)
        std::swap(shuffled[i - 1], shuffled[rng.index(i)]);
      CHECK(sym(b, shuffled) == base);
    }
  }
}

TEST_CASE("cube counts partition the configuration") {
  BoxDomain b({1.0});
  CHECK(cube_counts(Configuration::empty(b)).empty());

  Configuration single = sym(b, {{0.4}});
  auto m = cube_counts(single);
  REQUIRE(m.size() == 1);
  CHECK(m.at({0}) == 1);

  // 0.5 belongs to the cube centered at 1 under the half-open convention.
  Configuration edge = sym(b, {{0.5}});
  CHECK(cube_counts(edge).at({1}) == 1);

  Rng rng(17);
  BoxDomain big({10.0, 10.0});
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 5; ++i) pts.push_back({rng.uniform(0, 10), rng.uniform(0, 10)});
  auto counts = cube_counts(sym(big, pts));
  std::size_t total = 0;
  for (const auto& [r, c] : counts) total += c;
  CHECK(total == 5);
}

TEST_CASE("configuration record round trip") {
  BoxDomain b({2.0, 5.0});
  Configuration g = sym(b, {{0.123456789012345, 4.9}, {1.0 / 3.0, 1e-9}});
  const std::string rec = to_record(g);
  Configuration back = from_record(rec);
  CHECK(back == g);
  CHECK(to_record(back) == rec);

  CHECK_THROWS_AS(from_record("1 2.0"), std::invalid_argument);
  CHECK_THROWS_AS(from_record("1 2.0 1 0.5 0.7"), std::invalid_argument);
}

TEST_CASE("move_point stays in box") {
  BoxDomain b({1.0});
  Configuration g = sym(b, {{0.2}, {0.8}});
  const double ok[1] = {0.6};
  g.move_point(0, std::span<const double>(ok, 1));
  CHECK(g.point(0)[0] == doctest::Approx(0.6));
  const double bad[1] = {1.2};
  CHECK_THROWS_AS(g.move_point(0, std::span<const double>(bad, 1)), std::invalid_argument);
}
