#ifndef MGRC_EXEC_HPP
#define MGRC_EXEC_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mgrc {

// Execution policy for the data-parallel kernels. Every kernel has a serial
// reference path and an OpenMP path; both must produce bit-identical results
// for any worker count (no reordered reductions anywhere).
enum class exec { serial, parallel };

// Worker pool size for exec::parallel. Resolution order: programmatic
// override, MGRC_THREADS environment variable, OpenMP default.
int worker_count();
void set_worker_count(int n); // 0 restores env/default resolution

namespace kernels {

// Deterministic reductions: fixed-size blocks are reduced serially in index
// order, block partials are combined serially, so the result is independent
// of the worker count.
inline constexpr std::size_t reduce_block = 4096;

double max_abs(std::span<const double> v, exec policy);

struct min_max {
  double min;
  double max;
};
min_max minmax(std::span<const double> v, exec policy);

double sum_squares(std::span<const double> v, exec policy);

// True if any element is NaN or infinite.
bool any_non_finite(std::span<const double> v, exec policy);

} // namespace kernels

} // namespace mgrc

#endif
