#ifndef MGRC_TRANSFORM_HPP
#define MGRC_TRANSFORM_HPP

#include <span>
#include <vector>

#include "mgrc/exec.hpp"
#include "mgrc/grid.hpp"

namespace mgrc {

// Multilevel coefficients: per-node residuals of the data against multilinear
// interpolation from the next coarser level. Level-0 positions hold the raw
// nodal values. Same shape and layout (row-major) as the source array.
struct MultilevelCoefficients {
  std::vector<double> values;
  const GridHierarchy* hierarchy = nullptr;
};

// Fine-to-coarse sweep: every node new at level l is replaced by
// u(node) - I_{l-1}(node), where I_{l-1} interpolates from the level-(l-1)
// subgrid with coordinate weights (identity factor on axes where the node is
// not new). Linear in u. Throws ShapeMismatch / NonFiniteInput.
MultilevelCoefficients forward_transform(std::span<const double> u,
                                         const GridHierarchy& h,
                                         exec policy = exec::parallel);

// Exact inverse of forward_transform, coarse to fine.
std::vector<double> inverse_transform(const MultilevelCoefficients& c,
                                      exec policy = exec::parallel);

// In-place kernel form used by both directions (no validation, no copy).
namespace kernels {
void forward_transform_inplace(double* values, const GridHierarchy& h,
                               exec policy);
void inverse_transform_inplace(double* values, const GridHierarchy& h,
                               exec policy);
} // namespace kernels

} // namespace mgrc

#endif
