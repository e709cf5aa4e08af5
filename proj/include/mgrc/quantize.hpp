#ifndef MGRC_QUANTIZE_HPP
#define MGRC_QUANTIZE_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "mgrc/error_control.hpp"
#include "mgrc/exec.hpp"
#include "mgrc/grid.hpp"
#include "mgrc/transform.hpp"

namespace mgrc {

// Integer image of the multilevel coefficients under per-level bin widths:
// qvalue = round-half-even(coefficient / delta_level).
struct QuantizedCoefficients {
  std::vector<std::int64_t> qvalues; // row-major, same layout as coefficients
  LevelBudget budget;
  std::uint64_t outlier_count = 0; // |q| beyond int32 range (informational)
};

struct QuantizeResult {
  QuantizedCoefficients q;
  // Exact per-node errors coefficient - q*delta: precisely what the
  // dequantizer will reproduce, handed to achieved_error unchanged.
  MultilevelCoefficients residuals;
};

// Throws Overflow when |coefficient / delta| exceeds the 63-bit magnitude
// range (tolerance absurdly small for the data scale).
QuantizeResult quantize(const MultilevelCoefficients& c,
                        const LevelBudget& budget,
                        exec policy = exec::parallel);

MultilevelCoefficients dequantize(const QuantizedCoefficients& q,
                                  const GridHierarchy& h,
                                  exec policy = exec::parallel);

// Round to nearest, ties to even. Exact for all finite doubles; does not
// depend on the FPU rounding mode.
double round_half_even(double x);

} // namespace mgrc

#endif
