#ifndef MGRC_ERROR_CONTROL_HPP
#define MGRC_ERROR_CONTROL_HPP

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "mgrc/exec.hpp"
#include "mgrc/grid.hpp"
#include "mgrc/transform.hpp"

namespace mgrc {

enum class Norm : std::uint8_t { inf = 0, s = 1 };
enum class Mode : std::uint8_t { abs = 0, rel = 1 };

// User error specification: tolerance, norm family, abs/rel interpretation.
// norm == s with smoothness 0 is the L2/RMS case.
struct ErrorSpec {
  double tol = 0.0;
  Norm norm = Norm::inf;
  double smoothness = 0.0; // only meaningful when norm == Norm::s
  Mode mode = Mode::abs;
};

struct ErrorEstimate {
  double value = 0.0;
  Norm norm = Norm::inf;
  double smoothness = 0.0;
  bool certified = false; // exact evaluation: INF and S(0) only
};

// Per-level quantization bin widths, index 0 = coarsest level.
struct LevelBudget {
  std::vector<double> bin_widths;
};

// Sentinel exponent for levels with no nonzero coefficients.
inline constexpr int empty_level_exponent = std::numeric_limits<int>::min();

// Resolves the spec to an absolute tolerance for the given data: ABS passes
// tol through; REL scales by the value range (INF) or the RMS (S). Throws
// DegenerateData when the normalizer is zero.
double absolute_tolerance(const ErrorSpec& spec, std::span<const double> u,
                          exec policy = exec::parallel);

// Per-level bin widths whose worst-case accumulated quantization error stays
// within tau_abs. INF uses the same-level overlap bound (at most 2^d level-l
// hat functions are nonzero at a point, level 0 contributes at most its max
// residual), giving delta = 2 tau / (1 + L 2^d) at every level. S(s) splits
// the weighted aggregate budget evenly across levels.
LevelBudget initial_bin_widths(double tau_abs, const ErrorSpec& spec,
                               const GridHierarchy& h);

// Exact a posteriori estimate from the quantization residuals: reconstructs
// the error field through the inverse transform (the transform is linear)
// and measures it in the requested norm. For S(s != 0) returns the
// level-weighted coefficient aggregate instead (certified = false).
ErrorEstimate achieved_error(const MultilevelCoefficients& residuals,
                             const ErrorSpec& spec, const GridHierarchy& h,
                             exec policy = exec::parallel);

// Bound on the reconstruction error given how many bitplanes of each level
// have been retrieved. planes_fetched and level_exponents have one entry per
// level (0..L); total_planes is the store's plane count B. Non-increasing in
// every planes_fetched entry.
ErrorEstimate segment_estimator(std::span<const std::uint32_t> planes_fetched,
                                std::span<const int> level_exponents,
                                std::uint32_t total_planes,
                                const ErrorSpec& spec, const GridHierarchy& h);

} // namespace mgrc

#endif
