#ifndef MGRC_GRID_HPP
#define MGRC_GRID_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mgrc {

inline constexpr std::size_t max_dims = 4;

// d-dimensional tensor-product grid. Arrays over the grid are row-major
// (last axis fastest). Coordinates are per-axis, strictly increasing; when
// omitted they default to 0,1,...,n-1.
struct TensorGrid {
  std::vector<std::size_t> shape;             // per-axis node counts, each >= 2
  std::vector<std::vector<double>> coords;    // per-axis coordinates
  std::vector<bool> uniform;                  // derived: equispaced axis?
  bool explicit_coords = false;               // constructed with coordinates?

  std::size_t ndims() const { return shape.size(); }
  std::size_t element_count() const;
};

// Validates and fills in defaults. Throws InvalidShape / TooManyDims.
TensorGrid make_grid(std::vector<std::size_t> shape);
TensorGrid make_grid(std::vector<std::size_t> shape,
                     std::vector<std::vector<double>> coords);

// Multi-resolution node hierarchy. Level L (= nlevels) is the finest grid;
// level 0 is the coarsest. Each coarsening keeps the even positions of the
// current per-axis index set plus the last position when the set size is
// even, so sizes follow n_{l-1} = floor(n_l / 2) + 1 and both endpoints stay
// in every level. Axes that reach size 2 repeat their set at coarser levels.
struct GridHierarchy {
  TensorGrid grid;
  std::size_t nlevels = 0; // L: number of coarsening steps of the slowest axis

  // [l][axis] -> node count at level l (l in 0..L).
  std::vector<std::vector<std::size_t>> level_shapes;
  // [l][axis] -> sorted finest-grid indices of the nodes present at level l.
  std::vector<std::vector<std::vector<std::size_t>>> level_index_sets;
  // [axis][finest index] -> smallest level containing that index.
  std::vector<std::vector<std::uint8_t>> axis_level;
  // Number of nodes whose tag is l (level-0 entry counts the whole coarsest
  // box). Sums to the grid element count.
  std::vector<std::uint64_t> level_node_counts;

  std::size_t ndims() const { return grid.ndims(); }

  // Level tag of a node: the smallest level containing all its components.
  std::uint8_t level_tag(const std::size_t* idx) const {
    std::uint8_t tag = 0;
    for (std::size_t a = 0; a < axis_level.size(); ++a) {
      const std::uint8_t al = axis_level[a][idx[a]];
      if (al > tag) tag = al;
    }
    return tag;
  }
};

GridHierarchy build_hierarchy(const TensorGrid& grid);

// Multi-indices present at level l but not at level l-1 (l = 0 returns the
// coarsest box). Row-major order. Throws LevelOutOfRange.
std::vector<std::vector<std::size_t>> new_nodes(const GridHierarchy& h,
                                                std::size_t level);

// Deterministic byte serialization of the level structure (test support for
// the byte-for-byte determinism invariant).
std::vector<std::uint8_t> serialize_levels(const GridHierarchy& h);

} // namespace mgrc

#endif
