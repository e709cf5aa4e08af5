#include "mgrc/transform.hpp"

#include <cstddef>

#include "mgrc/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mgrc {

namespace {

// Per-axis interpolation stencil for one level: each entry of the level's
// index set is either a coarse node (identity factor) or a new node with its
// bracketing coarse neighbors and coordinate weights.
struct AxisStencil {
  std::vector<std::size_t> idx;    // finest index of each level-set entry
  std::vector<std::uint8_t> fresh; // 1 when new at this level
  std::vector<std::size_t> left;
  std::vector<std::size_t> right;
  std::vector<double> w_left;
  std::vector<double> w_right;
};

AxisStencil build_axis_stencil(const GridHierarchy& h, std::size_t level,
                               std::size_t axis) {
  const auto& set = h.level_index_sets[level][axis];
  const auto& x = h.grid.coords[axis];
  const std::size_t n = set.size();
  AxisStencil s;
  s.idx.assign(set.begin(), set.end());
  s.fresh.assign(n, 0);
  s.left.assign(n, 0);
  s.right.assign(n, 0);
  s.w_left.assign(n, 0.0);
  s.w_right.assign(n, 0.0);

  // Endpoints belong to every level, so every new node has coarse neighbors
  // on both sides within this level's set.
  std::size_t prev_coarse = set[0];
  std::vector<std::size_t> next_coarse(n, set[n - 1]);
  for (std::size_t p = n; p-- > 0;) {
    if (h.axis_level[axis][set[p]] < level) next_coarse[p] = set[p];
    else if (p + 1 < n) next_coarse[p] = next_coarse[p + 1];
  }
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t i = set[p];
    if (h.axis_level[axis][i] < level) {
      prev_coarse = i;
      continue;
    }
    s.fresh[p] = 1;
    s.left[p] = prev_coarse;
    s.right[p] = next_coarse[p];
    const double xl = x[s.left[p]];
    const double xr = x[s.right[p]];
    s.w_left[p] = (xr - x[i]) / (xr - xl);
    s.w_right[p] = (x[i] - xl) / (xr - xl);
  }
  return s;
}

// Applies one level of the transform: values[node] += sign * I_{l-1}(node)
// for every node new at `level`. Reads touch only coarse nodes, writes touch
// only new nodes, so the parallel schedule cannot affect the result.
void apply_level(double* values, const GridHierarchy& h, std::size_t level,
                 double sign, exec policy) {
  const std::size_t d = h.ndims();
  std::vector<AxisStencil> stencil(d);
  std::vector<std::size_t> stride(d, 1);
  for (std::size_t a = d - 1; a-- > 0;)
    stride[a] = stride[a + 1] * h.grid.shape[a + 1];
  for (std::size_t a = 0; a < d; ++a)
    stencil[a] = build_axis_stencil(h, level, a);

  std::size_t nrows = 1;
  for (std::size_t a = 0; a + 1 < d; ++a) nrows *= stencil[a].idx.size();
  const std::size_t inner = stencil[d - 1].idx.size();

  auto process_row = [&](std::size_t row) {
    // Decode the row into per-axis positions within the level sets.
    std::size_t pos[max_dims] = {0, 0, 0, 0};
    std::size_t r = row;
    for (std::size_t a = d - 1; a-- > 0;) {
      pos[a] = r % stencil[a].idx.size();
      r /= stencil[a].idx.size();
    }
    std::size_t base = 0;
    bool outer_new = false;
    for (std::size_t a = 0; a + 1 < d; ++a) {
      base += stencil[a].idx[pos[a]] * stride[a];
      outer_new |= stencil[a].fresh[pos[a]] != 0;
    }
    const AxisStencil& in = stencil[d - 1];
    for (std::size_t p = 0; p < inner; ++p) {
      const bool is_new = outer_new || in.fresh[p] != 0;
      if (!is_new) continue;
      pos[d - 1] = p;

      // Multilinear interpolation from the coarse subgrid: enumerate the
      // corner combinations of the new axes in a fixed order.
      std::size_t new_axes[max_dims];
      std::size_t n_new = 0;
      std::size_t fixed_offset = 0;
      for (std::size_t a = 0; a < d; ++a) {
        if (stencil[a].fresh[pos[a]]) new_axes[n_new++] = a;
        else fixed_offset += stencil[a].idx[pos[a]] * stride[a];
      }
      double interp = 0.0;
      const std::size_t ncorners = std::size_t{1} << n_new;
      for (std::size_t corner = 0; corner < ncorners; ++corner) {
        double w = 1.0;
        std::size_t off = fixed_offset;
        for (std::size_t k = 0; k < n_new; ++k) {
          const std::size_t a = new_axes[k];
          const std::size_t q = pos[a];
          if ((corner >> k) & 1u) {
            w *= stencil[a].w_right[q];
            off += stencil[a].right[q] * stride[a];
          } else {
            w *= stencil[a].w_left[q];
            off += stencil[a].left[q] * stride[a];
          }
        }
        interp += w * values[off];
      }
      values[base + in.idx[p] * stride[d - 1]] += sign * interp;
    }
  };

  if (policy == exec::parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(worker_count())
#endif
    for (std::ptrdiff_t row = 0; row < static_cast<std::ptrdiff_t>(nrows);
         ++row)
      process_row(static_cast<std::size_t>(row));
  } else {
    for (std::size_t row = 0; row < nrows; ++row) process_row(row);
  }
}

} // namespace

namespace kernels {

void forward_transform_inplace(double* values, const GridHierarchy& h,
                               exec policy) {
  for (std::size_t l = h.nlevels; l >= 1; --l)
    apply_level(values, h, l, -1.0, policy);
}

void inverse_transform_inplace(double* values, const GridHierarchy& h,
                               exec policy) {
  for (std::size_t l = 1; l <= h.nlevels; ++l)
    apply_level(values, h, l, +1.0, policy);
}

} // namespace kernels

MultilevelCoefficients forward_transform(std::span<const double> u,
                                         const GridHierarchy& h,
                                         exec policy) {
  if (u.size() != h.grid.element_count())
    raise(errc::shape_mismatch, "array has " + std::to_string(u.size()) +
                                    " elements, grid has " +
                                    std::to_string(h.grid.element_count()));
  if (kernels::any_non_finite(u, policy))
    raise(errc::non_finite_input, "input contains NaN or Inf");
  MultilevelCoefficients c;
  c.values.assign(u.begin(), u.end());
  c.hierarchy = &h;
  if (h.nlevels > 0)
    kernels::forward_transform_inplace(c.values.data(), h, policy);
  return c;
}

std::vector<double> inverse_transform(const MultilevelCoefficients& c,
                                      exec policy) {
  if (c.hierarchy == nullptr)
    raise(errc::shape_mismatch, "coefficients have no hierarchy");
  const GridHierarchy& h = *c.hierarchy;
  if (c.values.size() != h.grid.element_count())
    raise(errc::shape_mismatch,
          "coefficient count does not match the hierarchy");
  std::vector<double> u(c.values);
  if (h.nlevels > 0) kernels::inverse_transform_inplace(u.data(), h, policy);
  return u;
}

} // namespace mgrc
