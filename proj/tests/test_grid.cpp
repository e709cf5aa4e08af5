#include <doctest.h>

#include <algorithm>

#include "mgrc/error.hpp"
#include "mgrc/grid.hpp"

using namespace mgrc;

TEST_CASE("hierarchy level sizes follow floor(n/2)+1") {
  SUBCASE("shape [17]") {
    const auto h = build_hierarchy(make_grid({17}));
    CHECK(h.nlevels == 4);
    REQUIRE(h.level_shapes.size() == 5);
    CHECK(h.level_shapes[0][0] == 2);
    CHECK(h.level_shapes[1][0] == 3);
    CHECK(h.level_shapes[2][0] == 5);
    CHECK(h.level_shapes[3][0] == 9);
    CHECK(h.level_shapes[4][0] == 17);
  }
  SUBCASE("shape [9,5]") {
    const auto h = build_hierarchy(make_grid({9, 5}));
    CHECK(h.nlevels == 3);
    CHECK(h.level_shapes[0] == std::vector<std::size_t>{2, 2});
    CHECK(h.level_shapes[1] == std::vector<std::size_t>{3, 2});
    CHECK(h.level_shapes[2] == std::vector<std::size_t>{5, 3});
    CHECK(h.level_shapes[3] == std::vector<std::size_t>{9, 5});
  }
  SUBCASE("shape [6]: even-size rule keeps the last index") {
    const auto h = build_hierarchy(make_grid({6}));
    CHECK(h.nlevels == 3);
    CHECK(h.level_shapes[0][0] == 2);
    CHECK(h.level_shapes[1][0] == 3);
    CHECK(h.level_shapes[2][0] == 4);
    CHECK(h.level_shapes[3][0] == 6);
    CHECK(h.level_index_sets[2][0] ==
          std::vector<std::size_t>{0, 2, 4, 5});
  }
  SUBCASE("2x2 grid has a single level") {
    const auto h = build_hierarchy(make_grid({2, 2}));
    CHECK(h.nlevels == 0);
  }
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS((void)make_grid({1, 5}), error);
  CHECK_THROWS_AS((void)make_grid({5, 5, 5, 5, 5}), error);
  CHECK_THROWS_AS((void)make_grid({3}, {{0.0, 0.0, 1.0}}), error);
  CHECK_THROWS_AS((void)make_grid({3}, {{0.0, 1.0}}), error);
  try {
    (void)make_grid({1});
  } catch (const error& e) {
    CHECK(e.code() == errc::invalid_shape);
  }
  try {
    (void)make_grid({2, 2, 2, 2, 2});
  } catch (const error& e) {
    CHECK(e.code() == errc::too_many_dims);
  }
}

TEST_CASE("new_nodes examples") {
  const auto h5 = build_hierarchy(make_grid({5}));
  CHECK(new_nodes(h5, 2) ==
        std::vector<std::vector<std::size_t>>{{1}, {3}});
  CHECK(new_nodes(h5, 1) == std::vector<std::vector<std::size_t>>{{2}});
  CHECK(new_nodes(h5, 0) ==
        std::vector<std::vector<std::size_t>>{{0}, {4}});

  const auto h55 = build_hierarchy(make_grid({5, 5}));
  const auto nn = new_nodes(h55, 2);
  CHECK(nn.size() == 16); // multi-indices with at least one odd component
  for (const auto& node : nn)
    CHECK((node[0] % 2 == 1 || node[1] % 2 == 1));

  CHECK_THROWS_AS((void)new_nodes(h5, 3), error);
}

TEST_CASE("levels partition the grid and nest") {
  // Exhaustive over shapes with each axis in 2..17, up to 3-D.
  auto check_shape = [](const std::vector<std::size_t>& shape) {
    const auto h = build_hierarchy(make_grid(shape));
    std::vector<std::size_t> stride(shape.size(), 1);
    for (std::size_t a = shape.size() - 1; a-- > 0;)
      stride[a] = stride[a + 1] * shape[a + 1];
    std::vector<char> seen(h.grid.element_count(), 0);
    std::size_t total = 0;
    bool duplicate = false;
    for (std::size_t l = 0; l <= h.nlevels; ++l) {
      const auto nodes = new_nodes(h, l);
      if (nodes.size() != h.level_node_counts[l]) {
        CHECK(nodes.size() == h.level_node_counts[l]);
        return;
      }
      for (const auto& node : nodes) {
        std::size_t flat = 0;
        for (std::size_t a = 0; a < node.size(); ++a)
          flat += node[a] * stride[a];
        duplicate = duplicate || seen[flat];
        seen[flat] = 1;
        ++total;
      }
    }
    CHECK_FALSE(duplicate);
    CHECK(total == h.grid.element_count());
    // Nestedness per axis, endpoints on every level.
    for (std::size_t l = 0; l + 1 <= h.nlevels; ++l)
      for (std::size_t a = 0; a < h.ndims(); ++a) {
        const auto& coarse = h.level_index_sets[l][a];
        const auto& fine = h.level_index_sets[l + 1][a];
        bool nested = true;
        for (std::size_t idx : coarse)
          nested = nested &&
                   std::binary_search(fine.begin(), fine.end(), idx);
        CHECK(nested);
        CHECK(coarse.front() == 0);
        CHECK(coarse.back() == shape[a] - 1);
      }
  };

  for (std::size_t n = 2; n <= 17; ++n) check_shape({n});
  for (std::size_t n = 2; n <= 17; ++n)
    for (std::size_t m = 2; m <= 17; ++m) check_shape({n, m});
  for (std::size_t n = 2; n <= 17; ++n)
    for (std::size_t m = 2; m <= 17; ++m)
      for (std::size_t k = 2; k <= 17; ++k) check_shape({n, m, k});
}

TEST_CASE("hierarchy construction is deterministic") {
  const auto g = make_grid({9, 6}, {{0, 1, 2, 3, 4.5, 5, 6, 7.5, 9},
                                    {-1, 0, 0.25, 1, 2, 4}});
  const auto a = serialize_levels(build_hierarchy(g));
  const auto b = serialize_levels(build_hierarchy(g));
  CHECK(a == b);
}
