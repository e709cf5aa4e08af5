#include "mgrc/quantize.hpp"

#include <cmath>
#include <string>

#include "mgrc/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mgrc {

double round_half_even(double x) {
  // For |x| >= 2^52 every double is an integer; below that x - floor(x) is
  // exact, so the tie comparison is exact as well.
  if (!(std::fabs(x) < 4503599627370496.0)) return x;
  const double f = std::floor(x);
  const double frac = x - f;
  if (frac > 0.5) return f + 1.0;
  if (frac < 0.5) return f;
  return std::fmod(f, 2.0) == 0.0 ? f : f + 1.0;
}

namespace {

// Precomputed per-node level tags in row-major order would double memory
// traffic; instead walk rows (all axes but the last) and combine the cached
// outer tag with the last axis's table.
template <class Fn>
void for_each_row(const GridHierarchy& h, exec policy, Fn fn) {
  const std::size_t d = h.ndims();
  std::size_t nrows = 1;
  for (std::size_t a = 0; a + 1 < d; ++a) nrows *= h.grid.shape[a];
  const std::size_t inner = h.grid.shape[d - 1];

  auto row_tag = [&](std::size_t row, std::size_t* idx) {
    std::uint8_t tag = 0;
    std::size_t r = row;
    for (std::size_t a = d - 1; a-- > 0;) {
      idx[a] = r % h.grid.shape[a];
      r /= h.grid.shape[a];
    }
    for (std::size_t a = 0; a + 1 < d; ++a) {
      const std::uint8_t t = h.axis_level[a][idx[a]];
      if (t > tag) tag = t;
    }
    return tag;
  };

  if (policy == exec::parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(worker_count())
#endif
    for (std::ptrdiff_t row = 0; row < static_cast<std::ptrdiff_t>(nrows);
         ++row) {
      std::size_t idx[max_dims] = {0, 0, 0, 0};
      const std::uint8_t outer = row_tag(static_cast<std::size_t>(row), idx);
      fn(static_cast<std::size_t>(row) * inner, inner, outer);
    }
  } else {
    for (std::size_t row = 0; row < nrows; ++row) {
      std::size_t idx[max_dims] = {0, 0, 0, 0};
      const std::uint8_t outer = row_tag(row, idx);
      fn(row * inner, inner, outer);
    }
  }
}

} // namespace

QuantizeResult quantize(const MultilevelCoefficients& c,
                        const LevelBudget& budget, exec policy) {
  if (c.hierarchy == nullptr)
    raise(errc::shape_mismatch, "coefficients have no hierarchy");
  const GridHierarchy& h = *c.hierarchy;
  if (c.values.size() != h.grid.element_count())
    raise(errc::shape_mismatch, "coefficient count does not match the grid");
  if (budget.bin_widths.size() != h.nlevels + 1)
    raise(errc::shape_mismatch, "budget does not match the hierarchy");
  for (double w : budget.bin_widths)
    if (!(w > 0.0)) raise(errc::invalid_state, "bin widths must be > 0");

  QuantizeResult out;
  out.q.budget = budget;
  out.q.qvalues.resize(c.values.size());
  out.residuals.values.resize(c.values.size());
  out.residuals.hierarchy = &h;

  const auto& level_tags = h.axis_level[h.ndims() - 1];
  const double* coeff = c.values.data();
  std::int64_t* qv = out.q.qvalues.data();
  double* res = out.residuals.values.data();

  // 2^63 as a double; anything at or above it cannot be represented.
  constexpr double limit = 9223372036854775808.0;
  std::vector<std::uint64_t> row_overflow;
  std::vector<std::uint64_t> row_outliers;
  std::size_t d = h.ndims();
  std::size_t nrows = 1;
  for (std::size_t a = 0; a + 1 < d; ++a) nrows *= h.grid.shape[a];
  row_overflow.assign(nrows, 0);
  row_outliers.assign(nrows, 0);

  for_each_row(h, policy, [&](std::size_t base, std::size_t inner,
                              std::uint8_t outer_tag) {
    const std::size_t row = base / inner;
    for (std::size_t i = 0; i < inner; ++i) {
      const std::uint8_t tag =
          outer_tag > level_tags[i] ? outer_tag : level_tags[i];
      const double delta = budget.bin_widths[tag];
      const double scaled = coeff[base + i] / delta;
      if (!(std::fabs(scaled) < limit)) {
        ++row_overflow[row];
        continue;
      }
      const double rounded = round_half_even(scaled);
      const std::int64_t q = static_cast<std::int64_t>(rounded);
      qv[base + i] = q;
      res[base + i] = coeff[base + i] - static_cast<double>(q) * delta;
      if (q > 2147483647LL || q < -2147483648LL) ++row_outliers[row];
    }
  });

  std::uint64_t overflow = 0;
  for (std::uint64_t v : row_overflow) overflow += v;
  if (overflow > 0)
    raise(errc::overflow, std::to_string(overflow) +
                              " coefficients exceed the 63-bit symbol range");
  for (std::uint64_t v : row_outliers) out.q.outlier_count += v;
  return out;
}

MultilevelCoefficients dequantize(const QuantizedCoefficients& q,
                                  const GridHierarchy& h, exec policy) {
  if (q.qvalues.size() != h.grid.element_count())
    raise(errc::shape_mismatch, "qvalue count does not match the grid");
  if (q.budget.bin_widths.size() != h.nlevels + 1)
    raise(errc::shape_mismatch, "budget does not match the hierarchy");

  MultilevelCoefficients out;
  out.values.resize(q.qvalues.size());
  out.hierarchy = &h;
  const auto& level_tags = h.axis_level[h.ndims() - 1];
  const std::int64_t* qv = q.qvalues.data();
  double* v = out.values.data();

  for_each_row(h, policy, [&](std::size_t base, std::size_t inner,
                              std::uint8_t outer_tag) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::uint8_t tag =
          outer_tag > level_tags[i] ? outer_tag : level_tags[i];
      v[base + i] =
          static_cast<double>(qv[base + i]) * q.budget.bin_widths[tag];
    }
  });
  return out;
}

} // namespace mgrc
