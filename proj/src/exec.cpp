#include "mgrc/exec.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mgrc {

namespace {

std::atomic<int> g_override{0};

int env_threads() {
  const char* s = std::getenv("MGRC_THREADS");
  if (s == nullptr) return 0;
  const long n = std::strtol(s, nullptr, 10);
  return n > 0 ? static_cast<int>(n) : 0;
}

} // namespace

int worker_count() {
  const int forced = g_override.load(std::memory_order_relaxed);
  if (forced > 0) return forced;
  static const int from_env = env_threads();
  if (from_env > 0) return from_env;
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_worker_count(int n) {
  g_override.store(n > 0 ? n : 0, std::memory_order_relaxed);
}

namespace kernels {

namespace {

// Reduce one block [lo, hi) serially; combine per-block partials serially.
template <class Partial, class BlockFn, class CombineFn>
Partial blocked_reduce(std::size_t n, Partial init, BlockFn block_fn,
                       CombineFn combine, exec policy) {
  const std::size_t nblocks = n == 0 ? 0 : (n - 1) / reduce_block + 1;
  std::vector<Partial> partials(nblocks, init);
  if (policy == exec::parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(worker_count())
#endif
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(nblocks); ++b) {
      const std::size_t lo = static_cast<std::size_t>(b) * reduce_block;
      const std::size_t hi = lo + reduce_block < n ? lo + reduce_block : n;
      partials[static_cast<std::size_t>(b)] = block_fn(lo, hi);
    }
  } else {
    for (std::size_t b = 0; b < nblocks; ++b) {
      const std::size_t lo = b * reduce_block;
      const std::size_t hi = lo + reduce_block < n ? lo + reduce_block : n;
      partials[b] = block_fn(lo, hi);
    }
  }
  Partial acc = init;
  for (const Partial& p : partials) acc = combine(acc, p);
  return acc;
}

} // namespace

double max_abs(std::span<const double> v, exec policy) {
  return blocked_reduce<double>(
      v.size(), 0.0,
      [&](std::size_t lo, std::size_t hi) {
        double m = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
          const double a = std::fabs(v[i]);
          if (a > m) m = a;
        }
        return m;
      },
      [](double a, double b) { return a > b ? a : b; }, policy);
}

min_max minmax(std::span<const double> v, exec policy) {
  const min_max init{v.empty() ? 0.0 : v[0], v.empty() ? 0.0 : v[0]};
  return blocked_reduce<min_max>(
      v.size(), init,
      [&](std::size_t lo, std::size_t hi) {
        min_max m{v[lo], v[lo]};
        for (std::size_t i = lo; i < hi; ++i) {
          if (v[i] < m.min) m.min = v[i];
          if (v[i] > m.max) m.max = v[i];
        }
        return m;
      },
      [](min_max a, min_max b) {
        return min_max{a.min < b.min ? a.min : b.min,
                       a.max > b.max ? a.max : b.max};
      },
      policy);
}

double sum_squares(std::span<const double> v, exec policy) {
  return blocked_reduce<double>(
      v.size(), 0.0,
      [&](std::size_t lo, std::size_t hi) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += v[i] * v[i];
        return s;
      },
      [](double a, double b) { return a + b; }, policy);
}

bool any_non_finite(std::span<const double> v, exec policy) {
  return blocked_reduce<int>(
             v.size(), 0,
             [&](std::size_t lo, std::size_t hi) {
               for (std::size_t i = lo; i < hi; ++i)
                 if (!std::isfinite(v[i])) return 1;
               return 0;
             },
             [](int a, int b) { return a | b; }, policy) != 0;
}

} // namespace kernels

} // namespace mgrc
