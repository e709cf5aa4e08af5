#include "mgrc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "mgrc/error.hpp"

namespace mgrc {

std::size_t TensorGrid::element_count() const {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

namespace {

void validate_shape(const std::vector<std::size_t>& shape) {
  if (shape.empty()) raise(errc::invalid_shape, "grid needs at least one axis");
  if (shape.size() > max_dims)
    raise(errc::too_many_dims,
          "grid has " + std::to_string(shape.size()) + " axes, max is " +
              std::to_string(max_dims));
  for (std::size_t a = 0; a < shape.size(); ++a)
    if (shape[a] < 2)
      raise(errc::invalid_shape,
            "axis " + std::to_string(a) + " has " + std::to_string(shape[a]) +
                " nodes, need at least 2");
}

bool axis_uniform(const std::vector<double>& x) {
  if (x.size() < 3) return true;
  const double h0 = x[1] - x[0];
  const double scale = std::fabs(x.back() - x.front());
  for (std::size_t i = 1; i + 1 < x.size(); ++i)
    if (std::fabs((x[i + 1] - x[i]) - h0) > 1e-12 * scale) return false;
  return true;
}

// One coarsening step: keep the even positions, plus the last position when
// the set size is even. Size-2 sets are fixed points.
std::vector<std::size_t> coarsen(const std::vector<std::size_t>& fine) {
  const std::size_t n = fine.size();
  if (n <= 2) return fine;
  std::vector<std::size_t> coarse;
  coarse.reserve(n / 2 + 1);
  for (std::size_t p = 0; p < n; p += 2) coarse.push_back(fine[p]);
  if (n % 2 == 0) coarse.push_back(fine[n - 1]);
  return coarse;
}

} // namespace

TensorGrid make_grid(std::vector<std::size_t> shape) {
  validate_shape(shape);
  TensorGrid g;
  g.shape = std::move(shape);
  g.coords.resize(g.shape.size());
  g.uniform.assign(g.shape.size(), true);
  for (std::size_t a = 0; a < g.shape.size(); ++a) {
    g.coords[a].resize(g.shape[a]);
    for (std::size_t i = 0; i < g.shape[a]; ++i)
      g.coords[a][i] = static_cast<double>(i);
  }
  return g;
}

TensorGrid make_grid(std::vector<std::size_t> shape,
                     std::vector<std::vector<double>> coords) {
  validate_shape(shape);
  if (coords.size() != shape.size())
    raise(errc::invalid_shape, "coordinate axis count does not match shape");
  for (std::size_t a = 0; a < shape.size(); ++a) {
    if (coords[a].size() != shape[a])
      raise(errc::invalid_shape,
            "axis " + std::to_string(a) + " has " +
                std::to_string(coords[a].size()) + " coordinates for " +
                std::to_string(shape[a]) + " nodes");
    for (std::size_t i = 0; i + 1 < coords[a].size(); ++i)
      if (!(coords[a][i] < coords[a][i + 1]))
        raise(errc::invalid_shape, "axis " + std::to_string(a) +
                                       " coordinates are not strictly "
                                       "increasing");
    if (!std::isfinite(coords[a].front()) || !std::isfinite(coords[a].back()))
      raise(errc::invalid_shape,
            "axis " + std::to_string(a) + " has non-finite coordinates");
  }
  TensorGrid g;
  g.shape = std::move(shape);
  g.coords = std::move(coords);
  g.explicit_coords = true;
  g.uniform.resize(g.shape.size());
  for (std::size_t a = 0; a < g.shape.size(); ++a)
    g.uniform[a] = axis_uniform(g.coords[a]);
  return g;
}

GridHierarchy build_hierarchy(const TensorGrid& grid) {
  validate_shape(grid.shape);
  const std::size_t d = grid.ndims();

  // Per-axis chains of index sets, finest first.
  std::vector<std::vector<std::vector<std::size_t>>> chains(d);
  std::size_t nlevels = 0;
  for (std::size_t a = 0; a < d; ++a) {
    std::vector<std::size_t> set(grid.shape[a]);
    for (std::size_t i = 0; i < set.size(); ++i) set[i] = i;
    chains[a].push_back(set);
    while (chains[a].back().size() > 2)
      chains[a].push_back(coarsen(chains[a].back()));
    nlevels = std::max(nlevels, chains[a].size() - 1);
  }

  GridHierarchy h;
  h.grid = grid;
  h.nlevels = nlevels;
  h.level_shapes.resize(nlevels + 1);
  h.level_index_sets.resize(nlevels + 1);
  for (std::size_t l = 0; l <= nlevels; ++l) {
    h.level_shapes[l].resize(d);
    h.level_index_sets[l].resize(d);
    for (std::size_t a = 0; a < d; ++a) {
      // Axes that bottom out early repeat their coarsest set.
      const std::size_t steps = std::min(nlevels - l, chains[a].size() - 1);
      h.level_index_sets[l][a] = chains[a][steps];
      h.level_shapes[l][a] = h.level_index_sets[l][a].size();
    }
  }

  // Smallest level containing each index: assign from fine to coarse so the
  // coarsest membership wins.
  h.axis_level.resize(d);
  for (std::size_t a = 0; a < d; ++a) {
    h.axis_level[a].assign(grid.shape[a], static_cast<std::uint8_t>(nlevels));
    for (std::size_t l = nlevels + 1; l-- > 0;)
      for (std::size_t idx : h.level_index_sets[l][a])
        h.axis_level[a][idx] = static_cast<std::uint8_t>(l);
  }

  // Nodes new at level l = level-l box minus level-(l-1) box.
  h.level_node_counts.assign(nlevels + 1, 0);
  std::uint64_t prev_box = 0;
  for (std::size_t l = 0; l <= nlevels; ++l) {
    std::uint64_t box = 1;
    for (std::size_t a = 0; a < d; ++a) box *= h.level_shapes[l][a];
    h.level_node_counts[l] = box - prev_box;
    prev_box = box;
  }

  return h;
}

std::vector<std::vector<std::size_t>> new_nodes(const GridHierarchy& h,
                                                std::size_t level) {
  if (level > h.nlevels)
    raise(errc::level_out_of_range,
          "level " + std::to_string(level) + " of " +
              std::to_string(h.nlevels));
  const std::size_t d = h.ndims();
  std::vector<std::vector<std::size_t>> out;

  // Walk the level box row-major and keep nodes whose tag is exactly `level`.
  std::vector<std::size_t> pos(d, 0);
  const auto& sets = h.level_index_sets[level];
  std::vector<std::size_t> idx(d);
  while (true) {
    bool is_new = level == 0;
    for (std::size_t a = 0; a < d; ++a) {
      idx[a] = sets[a][pos[a]];
      if (level > 0 && h.axis_level[a][idx[a]] == level) is_new = true;
    }
    if (is_new) out.push_back(idx);
    std::size_t a = d;
    while (a-- > 0) {
      if (++pos[a] < sets[a].size()) break;
      pos[a] = 0;
      if (a == 0) return out;
    }
  }
}

std::vector<std::uint8_t> serialize_levels(const GridHierarchy& h) {
  std::vector<std::uint8_t> out;
  auto put_u64 = [&out](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  put_u64(h.nlevels);
  put_u64(h.ndims());
  for (std::size_t l = 0; l <= h.nlevels; ++l)
    for (std::size_t a = 0; a < h.ndims(); ++a) {
      put_u64(h.level_index_sets[l][a].size());
      for (std::size_t idx : h.level_index_sets[l][a]) put_u64(idx);
    }
  return out;
}

} // namespace mgrc
