#include "mgrc/chunking.hpp"

#include <string>

#include "mgrc/error.hpp"
#include "mgrc/grid.hpp"

namespace mgrc {

std::vector<BlockRange> ChunkPlan::block(std::size_t index) const {
  std::vector<BlockRange> out(axis_ranges.size());
  for (std::size_t a = axis_ranges.size(); a-- > 0;) {
    out[a] = axis_ranges[a][index % axis_ranges[a].size()];
    index /= axis_ranges[a].size();
  }
  return out;
}

namespace {

// Near-equal split of [0, n) into k ranges, longer ranges first.
std::vector<BlockRange> split_axis(std::size_t n, std::size_t k) {
  std::vector<BlockRange> ranges;
  ranges.reserve(k);
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::size_t at = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t len = base + (i < extra ? 1 : 0);
    ranges.push_back({at, at + len});
    at += len;
  }
  return ranges;
}

} // namespace

ChunkPlan plan_chunks(std::span<const std::size_t> shape, DType dtype,
                      std::uint64_t budget_bytes) {
  if (shape.empty() || shape.size() > max_dims)
    raise(errc::invalid_shape, "unsupported dimension count");
  for (std::size_t s : shape)
    if (s < 2) raise(errc::invalid_shape, "axis shorter than 2 nodes");

  const std::uint64_t unit = dtype_size(dtype);
  std::uint64_t total = unit;
  for (std::size_t s : shape) total *= s;

  ChunkPlan plan;
  plan.shape.assign(shape.begin(), shape.end());
  plan.dtype = dtype;
  plan.budget = budget_bytes;
  plan.axis_ranges.resize(shape.size());

  if (total <= budget_bytes) {
    for (std::size_t a = 0; a < shape.size(); ++a)
      plan.axis_ranges[a] = {{0, shape[a]}};
    return plan;
  }

  std::uint64_t floor_bytes = unit;
  for (std::size_t a = 0; a < shape.size(); ++a) floor_bytes *= 17;
  if (budget_bytes < floor_bytes)
    raise(errc::budget_too_small,
          "budget " + std::to_string(budget_bytes) + " is below one 17^" +
              std::to_string(shape.size()) + " block (" +
              std::to_string(floor_bytes) + " bytes)");

  // Slowest-varying axis first; later axes only when even 2-node ranges on
  // the earlier ones cannot fit.
  std::uint64_t prefix = 1; // product of chosen per-axis maximum lengths
  for (std::size_t a = 0; a < shape.size(); ++a) {
    std::uint64_t tail = unit;
    for (std::size_t b = a + 1; b < shape.size(); ++b) tail *= shape[b];

    const std::uint64_t cap = budget_bytes / (prefix * tail);
    if (cap >= shape[a]) {
      // This axis fits whole; so does everything after it.
      for (std::size_t b = a; b < shape.size(); ++b)
        plan.axis_ranges[b] = {{0, shape[b]}};
      break;
    }
    const std::size_t want = cap >= 2 ? static_cast<std::size_t>(cap) : 2;
    std::size_t k = (shape[a] + want - 1) / want;
    if (k > shape[a] / 2) k = shape[a] / 2; // keep every range >= 2 nodes
    if (k < 1) k = 1;
    plan.axis_ranges[a] = split_axis(shape[a], k);
    std::size_t max_len = 0;
    for (const auto& r : plan.axis_ranges[a])
      max_len = std::max(max_len, r.length());
    prefix *= max_len;
    if (prefix * tail <= budget_bytes && a + 1 < shape.size()) {
      for (std::size_t b = a + 1; b < shape.size(); ++b)
        plan.axis_ranges[b] = {{0, shape[b]}};
      break;
    }
  }

  // The plan must fit; the 17^d floor guarantees it.
  std::uint64_t worst = unit;
  for (const auto& ranges : plan.axis_ranges) {
    std::size_t max_len = 0;
    for (const auto& r : ranges) max_len = std::max(max_len, r.length());
    worst *= max_len;
  }
  if (worst > budget_bytes)
    raise(errc::budget_too_small,
          "budget cannot hold a minimal block of this shape");
  return plan;
}

} // namespace mgrc
