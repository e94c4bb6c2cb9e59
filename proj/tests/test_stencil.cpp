#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "stencil_tune/stencil.hpp"

using namespace stune;

namespace {

bool same_field(const Grid3D& a, const Grid3D& b) {
  const auto x = a.current();
  const auto y = b.current();
  const auto px = a.previous();
  const auto py = b.previous();
  return std::equal(x.begin(), x.end(), y.begin(), y.end()) && std::equal(px.begin(), px.end(), py.begin(), py.end());
}

void fill_random(Grid3D& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const auto& s = g.size();
  for (std::int64_t i = 0; i < s.i; ++i)
    for (std::int64_t j = 0; j < s.j; ++j)
      for (std::int64_t k = 0; k < s.k; ++k) {
        g.curr(i, j, k) = dist(rng);
        g.prev(i, j, k) = dist(rng);
      }
}

}  // namespace

TEST_CASE("coefficients sum to zero along an axis", "[stencil]") {
  double sum = kLaplacianCoefficients[0];
  for (int m = 1; m <= 5; ++m) sum += 2.0 * kLaplacianCoefficients[static_cast<std::size_t>(m)];
  REQUIRE(std::abs(sum) < 1e-14);
}

TEST_CASE("zero field stays zero", "[stencil]") {
  Grid3D g({12, 12, 12});
  step_untiled(g, std::nullopt, 0);
  REQUIRE(g.max_abs() == 0.0);
}

TEST_CASE("constant field is a fixed point away from the boundary", "[stencil]") {
  const ProblemSize s{16, 16, 16};
  Grid3D g(s);
  for (std::int64_t i = 0; i < s.i; ++i)
    for (std::int64_t j = 0; j < s.j; ++j)
      for (std::int64_t k = 0; k < s.k; ++k) g.curr(i, j, k) = g.prev(i, j, k) = 3.5;
  step_untiled(g, std::nullopt, 0);
  for (std::int64_t i = 5; i < s.i - 5; ++i)
    for (std::int64_t j = 5; j < s.j - 5; ++j)
      for (std::int64_t k = 5; k < s.k - 5; ++k) REQUIRE(g.curr(i, j, k) == Catch::Approx(3.5).margin(1e-13));
}

TEST_CASE("delta impulse matches a box-convolution reference", "[stencil][oracle]") {
  const ProblemSize s{32, 32, 32};
  const double dt = 0.1, dx = 1.0, v = 1.0;
  Grid3D g(s, dt, dx, v);
  oracle::Field curr(32, 32, 32), prev(32, 32, 32);
  g.curr(16, 16, 16) = 1.0;
  curr.at(16, 16, 16) = 1.0;

  step_untiled(g, std::nullopt, 0);
  const auto ref = oracle::convolution_step(curr, prev, v * v * dt * dt / (dx * dx));
  for (std::int64_t i = 0; i < s.i; ++i)
    for (std::int64_t j = 0; j < s.j; ++j)
      for (std::int64_t k = 0; k < s.k; ++k) REQUIRE(g.curr(i, j, k) == Catch::Approx(ref.get(i, j, k)).margin(1e-15));
  // spot value: centre = 2 + factor * 3 c0
  REQUIRE(g.curr(16, 16, 16) == Catch::Approx(2.0 + 0.01 * 3.0 * (-5269.0 / 1800.0)).epsilon(1e-14));
}

TEST_CASE("random field matches the convolution reference over two steps", "[stencil][oracle]") {
  const ProblemSize s{13, 11, 9};
  Grid3D g(s, 0.05, 1.0, 1.0);
  fill_random(g, 7);
  oracle::Field curr(13, 11, 9), prev(13, 11, 9);
  for (std::int64_t i = 0; i < s.i; ++i)
    for (std::int64_t j = 0; j < s.j; ++j)
      for (std::int64_t k = 0; k < s.k; ++k) {
        curr.at(i, j, k) = g.curr(i, j, k);
        prev.at(i, j, k) = g.prev(i, j, k);
      }
  for (int n = 0; n < 2; ++n) {
    step_tiled(g, {4, 3, 2}, std::nullopt, n);
    auto next = oracle::convolution_step(curr, prev, 0.05 * 0.05);
    prev = curr;
    curr = next;
  }
  for (std::int64_t i = 0; i < s.i; ++i)
    for (std::int64_t j = 0; j < s.j; ++j)
      for (std::int64_t k = 0; k < s.k; ++k) REQUIRE(g.curr(i, j, k) == Catch::Approx(curr.get(i, j, k)).margin(1e-12));
}

TEST_CASE("tiled traversal reproduces the untiled field bit for bit", "[stencil]") {
  SECTION("single tile") {
    Grid3D a({10, 12, 14}), b({10, 12, 14});
    fill_random(a, 1);
    fill_random(b, 1);
    step_untiled(a, std::nullopt, 0);
    step_tiled(b, {10, 12, 14}, std::nullopt, 0);
    REQUIRE(same_field(a, b));
  }
  SECTION("unit tiles on 16^3") {
    Grid3D a({16, 16, 16}), b({16, 16, 16});
    fill_random(a, 2);
    fill_random(b, 2);
    step_untiled(a, std::nullopt, 0);
    step_tiled(b, {1, 1, 1}, std::nullopt, 0);
    REQUIRE(same_field(a, b));
  }
  SECTION("ragged 7x5x3 tiles on 20^3, ten steps, with a source") {
    Grid3D a({20, 20, 20}), b({20, 20, 20});
    const SourceTerm src{{10, 9, 8}, 0.5, 2.0};
    for (int t = 0; t < 10; ++t) {
      step_untiled(a, src, t);
      step_tiled(b, {7, 5, 3}, src, t);
    }
    REQUIRE(a.max_abs() > 0.0);
    REQUIRE(same_field(a, b));
  }
}

TEST_CASE("tiles cover the interior exactly once", "[stencil][property]") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const ProblemSize s{1 + static_cast<std::int64_t>(rng() % 17), 1 + static_cast<std::int64_t>(rng() % 17),
                        1 + static_cast<std::int64_t>(rng() % 17)};
    const BlockSize b{1 + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(s.i)),
                      1 + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(s.j)),
                      1 + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(s.k))};
    std::vector<int> visits(static_cast<std::size_t>(s.points()), 0);
    std::int64_t tiles = 0;
    for_each_tile(s, b, [&](auto i0, auto i1, auto j0, auto j1, auto k0, auto k1) {
      ++tiles;
      for (auto i = i0; i < i1; ++i)
        for (auto j = j0; j < j1; ++j)
          for (auto k = k0; k < k1; ++k) ++visits[static_cast<std::size_t>((i * s.j + j) * s.k + k)];
    });
    REQUIRE(std::all_of(visits.begin(), visits.end(), [](int v) { return v == 1; }));
    REQUIRE(tiles == tile_count(s, b));
  }
}

TEST_CASE("tile visiting order is i outer, k inner", "[stencil]") {
  std::vector<std::array<std::int64_t, 3>> starts;
  for_each_tile({4, 4, 4}, {2, 2, 2}, [&](auto i0, auto, auto j0, auto, auto k0, auto) {
    starts.push_back({i0, j0, k0});
  });
  REQUIRE(starts.size() == 8);
  REQUIRE(starts[0] == std::array<std::int64_t, 3>{0, 0, 0});
  REQUIRE(starts[1] == std::array<std::int64_t, 3>{0, 0, 2});
  REQUIRE(starts[2] == std::array<std::int64_t, 3>{0, 2, 0});
  REQUIRE(starts[4] == std::array<std::int64_t, 3>{2, 0, 0});
}

TEST_CASE("invalid blocks are rejected", "[stencil]") {
  Grid3D g({8, 8, 8});
  REQUIRE_THROWS_AS(step_tiled(g, {0, 1, 1}, std::nullopt, 0), ContractViolation);
  REQUIRE_THROWS_AS(step_tiled(g, {1, 9, 1}, std::nullopt, 0), ContractViolation);
  REQUIRE_THROWS_WITH(run_iterations(g, {1, 1, 9}, 1), Catch::Matchers::ContainsSubstring("b_k"));
  REQUIRE_THROWS_AS(run_iterations(g, {1, 1, 1}, 0), ContractViolation);
  REQUIRE_THROWS_AS(step_untiled(g, SourceTerm{{8, 0, 0}}, 0), ContractViolation);
}

TEST_CASE("run_iterations composes tiled steps", "[stencil]") {
  const SourceTerm src{{6, 6, 6}};
  Grid3D a({12, 12, 12}), b({12, 12, 12}), c({12, 12, 12});
  const double once = run_iterations(a, {5, 4, 3}, 1, src);
  step_tiled(b, {5, 4, 3}, src, 0);
  REQUIRE(same_field(a, b));
  REQUIRE(once > 0.0);

  Grid3D d({12, 12, 12});
  const double five = run_iterations(d, {5, 4, 3}, 5, src);
  for (int t = 0; t < 5; ++t) step_tiled(c, {5, 4, 3}, src, t);
  REQUIRE(same_field(c, d));
  REQUIRE(five > 0.0);
}

TEST_CASE("velocity field reproduces the constant velocity when uniform", "[stencil]") {
  Grid3D a({9, 9, 9}, 0.1, 1.0, 1.5), b({9, 9, 9}, 0.1, 1.0, 7.0);
  b.set_velocity_field(std::vector<double>(9 * 9 * 9, 1.5));
  fill_random(a, 4);
  fill_random(b, 4);
  step_untiled(a, std::nullopt, 0);
  step_untiled(b, std::nullopt, 0);
  REQUIRE(same_field(a, b));
  REQUIRE_THROWS_AS(b.set_velocity_field(std::vector<double>(10, 1.0)), ContractViolation);
}

TEST_CASE("field stays bounded under a stable Courant number", "[stencil][property]") {
  Grid3D g({32, 32, 32}, 0.2, 1.0, 1.0);
  const SourceTerm src{{16, 16, 16}, 0.25, 1.0};
  for (int t = 0; t < 100; ++t) step_tiled(g, {8, 8, 32}, src, t);
  const double m = g.max_abs();
  REQUIRE(std::isfinite(m));
  REQUIRE(m < 1e6);
  REQUIRE(m > 0.0);
}

TEST_CASE("halo stays zero", "[stencil]") {
  Grid3D g({10, 10, 10});
  const SourceTerm src{{0, 0, 0}, 0.5, 5.0};
  for (int t = 0; t < 20; ++t) step_tiled(g, {3, 3, 3}, src, t);
  for (std::int64_t h = -5; h < 0; ++h) {
    REQUIRE(g.curr(h, 0, 0) == 0.0);
    REQUIRE(g.curr(0, h, 0) == 0.0);
    REQUIRE(g.curr(0, 0, h) == 0.0);
    REQUIRE(g.curr(10 - h - 1, 3, 3) == 0.0);
  }
}
