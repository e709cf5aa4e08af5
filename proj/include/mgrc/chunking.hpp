#ifndef MGRC_CHUNKING_HPP
#define MGRC_CHUNKING_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "mgrc/container.hpp"

namespace mgrc {

struct BlockRange {
  std::size_t begin = 0;
  std::size_t end = 0; // exclusive
  std::size_t length() const { return end - begin; }
};

// Partition of a d-dimensional array into blocks that each fit a byte
// budget. Ranges form a tensor grid: blocks tile the domain exactly with no
// overlap and no ghost nodes. Block order is row-major over the range grid
// (last axis fastest).
struct ChunkPlan {
  std::vector<std::size_t> shape;
  DType dtype = DType::f64;
  std::uint64_t budget = 0;
  std::vector<std::vector<BlockRange>> axis_ranges;

  std::size_t block_count() const {
    std::size_t n = 1;
    for (const auto& r : axis_ranges) n *= r.size();
    return n;
  }
  // Per-axis ranges of block `index` in scan order.
  std::vector<BlockRange> block(std::size_t index) const;
};

// Splits the slowest-varying axis first into near-equal ranges (each at
// least 2 nodes) until blocks fit the budget. Deterministic. Throws
// BudgetTooSmall when the array needs splitting but the budget is below one
// 17^d block.
ChunkPlan plan_chunks(std::span<const std::size_t> shape, DType dtype,
                      std::uint64_t budget_bytes);

} // namespace mgrc

#endif
