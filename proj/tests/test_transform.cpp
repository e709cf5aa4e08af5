#include <doctest.h>

#include <cmath>

#include "mgrc/error.hpp"
#include "mgrc/transform.hpp"
#include "support/test_support.hpp"

using namespace mgrc;
using namespace mgrc::test;

TEST_CASE("constant fields decompose to level-0 values only") {
  const auto g = make_grid({9, 7});
  const auto h = build_hierarchy(g);
  std::vector<double> u(g.element_count(), 3.25);
  const auto c = forward_transform(u, h);
  std::size_t flat = 0;
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 7; ++j, ++flat) {
      const std::size_t idx[2] = {i, j};
      if (h.level_tag(idx) == 0) CHECK(c.values[flat] == 3.25);
      else CHECK(c.values[flat] == 0.0);
    }
}

TEST_CASE("linear data on a uniform grid has zero detail coefficients") {
  const auto g = make_grid({17});
  const auto h = build_hierarchy(g);
  std::vector<double> u(17);
  for (std::size_t i = 0; i < 17; ++i) u[i] = static_cast<double>(i) * 0.125;
  const auto c = forward_transform(u, h);
  for (std::size_t i = 1; i < 16; ++i) CHECK(std::fabs(c.values[i]) < 1e-14);
}

TEST_CASE("x^2 on five nodes: hand-computed residuals") {
  const auto g = make_grid({5}, {{0.0, 0.25, 0.5, 0.75, 1.0}});
  const auto h = build_hierarchy(g);
  const std::vector<double> u = {0.0, 0.0625, 0.25, 0.5625, 1.0};
  const auto c = forward_transform(u, h);
  CHECK(c.values[1] == doctest::Approx(-0.0625).epsilon(1e-14));
  CHECK(c.values[3] == doctest::Approx(-0.0625).epsilon(1e-14));
  CHECK(c.values[2] == doctest::Approx(-0.25).epsilon(1e-14));
  CHECK(c.values[0] == 0.0);
  CHECK(c.values[4] == 1.0);

  const auto back = inverse_transform(c);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(back[i] == doctest::Approx(u[i]).epsilon(1e-15));
}

TEST_CASE("round-trip accuracy") {
  Rng rng(42);
  SUBCASE("f64 random field 17x33x5") {
    const auto g = make_grid({17, 33, 5});
    const auto h = build_hierarchy(g);
    const auto u = random_field(g.shape, rng);
    const auto back = inverse_transform(forward_transform(u, h));
    CHECK(max_abs_diff(u, back) / range_of(u) <= 1e-10);
  }
  SUBCASE("f32 pathway") {
    const auto g = make_grid({33, 9});
    const auto h = build_hierarchy(g);
    std::vector<double> u(g.element_count());
    for (double& v : u)
      v = static_cast<double>(static_cast<float>(rng.uniform(-5.0, 5.0)));
    const auto back = inverse_transform(forward_transform(u, h));
    double err = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
      err = std::max(err, std::fabs(static_cast<float>(back[i]) -
                                    static_cast<float>(u[i])));
    CHECK(err / range_of(u) <= 1e-4);
  }
}

TEST_CASE("all-zero coefficients invert to the zero array") {
  const auto g = make_grid({9, 5});
  const auto h = build_hierarchy(g);
  MultilevelCoefficients c;
  c.values.assign(g.element_count(), 0.0);
  c.hierarchy = &h;
  for (double v : inverse_transform(c)) CHECK(v == 0.0);
}

TEST_CASE("transform is linear") {
  Rng rng(7);
  const auto g = make_grid({9, 17});
  const auto h = build_hierarchy(g);
  const auto u = random_field(g.shape, rng);
  const auto v = random_field(g.shape, rng);
  const double a = rng.uniform(-3.0, 3.0);
  const double b = rng.uniform(-3.0, 3.0);
  std::vector<double> mix(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) mix[i] = a * u[i] + b * v[i];

  const auto cu = forward_transform(u, h);
  const auto cv = forward_transform(v, h);
  const auto cm = forward_transform(mix, h);
  double err = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    err = std::max(err,
                   std::fabs(cm.values[i] - (a * cu.values[i] + b * cv.values[i])));
  CHECK(err <= 1e-11 * (std::fabs(a) + std::fabs(b)) * 2.0);
}

TEST_CASE("multilinear polynomials annihilate on uniform grids") {
  const auto g = make_grid({9, 9});
  const auto h = build_hierarchy(g);
  std::vector<double> u(g.element_count());
  std::size_t flat = 0;
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 9; ++j, ++flat) {
      const double x = static_cast<double>(i), y = static_cast<double>(j);
      u[flat] = 2.0 - 0.5 * x + 0.25 * y + 0.125 * x * y;
    }
  const auto c = forward_transform(u, h);
  flat = 0;
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 9; ++j, ++flat) {
      const std::size_t idx[2] = {i, j};
      if (h.level_tag(idx) > 0) CHECK(std::fabs(c.values[flat]) < 1e-12);
    }
}

TEST_CASE("non-uniform 1-D coefficients match the interpolation formula") {
  Rng rng(99);
  const auto coords = increasing_coords(17, rng);
  const auto g = make_grid({17}, {coords});
  const auto h = build_hierarchy(g);
  const auto u = random_field({17}, rng);
  const auto c = forward_transform(u, h);

  for (std::size_t l = 1; l <= h.nlevels; ++l) {
    const auto& fine = h.level_index_sets[l][0];
    const auto& coarse = h.level_index_sets[l - 1][0];
    for (std::size_t i : fine) {
      if (std::binary_search(coarse.begin(), coarse.end(), i)) continue;
      // Bracketing coarse neighbors.
      std::size_t left = coarse[0], right = coarse.back();
      for (std::size_t cI : coarse) {
        if (cI < i) left = cI;
        if (cI > i) {
          right = cI;
          break;
        }
      }
      const double x = coords[i], xl = coords[left], xr = coords[right];
      const double expected =
          u[i] - ((xr - x) * u[left] + (x - xl) * u[right]) / (xr - xl);
      CHECK(c.values[i] == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("transform error paths") {
  const auto g = make_grid({5, 5});
  const auto h = build_hierarchy(g);
  std::vector<double> wrong(7, 0.0);
  CHECK_THROWS_AS((void)forward_transform(wrong, h), error);
  std::vector<double> bad(g.element_count(), 0.0);
  bad[3] = std::nan("");
  CHECK_THROWS_AS((void)forward_transform(bad, h), error);
  try {
    (void)forward_transform(bad, h);
  } catch (const error& e) {
    CHECK(e.code() == errc::non_finite_input);
  }
}
