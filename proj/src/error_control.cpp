#include "mgrc/error_control.hpp"

#include <cmath>
#include <string>

#include "mgrc/error.hpp"

namespace mgrc {

namespace {

double rms(std::span<const double> u, exec policy) {
  if (u.empty()) return 0.0;
  return std::sqrt(kernels::sum_squares(u, policy) /
                   static_cast<double>(u.size()));
}

bool estimate_certified(const ErrorSpec& spec) {
  return spec.norm == Norm::inf ||
         (spec.norm == Norm::s && spec.smoothness == 0.0);
}

} // namespace

double absolute_tolerance(const ErrorSpec& spec, std::span<const double> u,
                          exec policy) {
  if (!(spec.tol > 0.0)) raise(errc::invalid_state, "tolerance must be > 0");
  if (u.empty()) raise(errc::shape_mismatch, "empty array");
  if (spec.mode == Mode::abs) return spec.tol;
  if (spec.norm == Norm::inf) {
    const auto mm = kernels::minmax(u, policy);
    const double range = mm.max - mm.min;
    if (range == 0.0)
      raise(errc::degenerate_data, "relative bound on a constant field");
    return spec.tol * range;
  }
  const double r = rms(u, policy);
  if (r == 0.0) raise(errc::degenerate_data, "relative bound on a zero field");
  return spec.tol * r;
}

LevelBudget initial_bin_widths(double tau_abs, const ErrorSpec& spec,
                               const GridHierarchy& h) {
  if (!(tau_abs > 0.0))
    raise(errc::invalid_state, "absolute tolerance must be > 0");
  const double L = static_cast<double>(h.nlevels);
  const double cells = std::ldexp(1.0, static_cast<int>(h.ndims())); // 2^d
  LevelBudget budget;
  budget.bin_widths.resize(h.nlevels + 1);
  if (spec.norm == Norm::inf) {
    const double delta = 2.0 * tau_abs / (1.0 + L * cells);
    for (double& w : budget.bin_widths) w = delta;
  } else {
    const double base = 2.0 * tau_abs / std::sqrt((L + 1.0) * cells);
    for (std::size_t l = 0; l <= h.nlevels; ++l)
      budget.bin_widths[l] =
          base * std::exp2(spec.smoothness * (L - static_cast<double>(l)));
  }
  return budget;
}

ErrorEstimate achieved_error(const MultilevelCoefficients& residuals,
                             const ErrorSpec& spec, const GridHierarchy& h,
                             exec policy) {
  if (residuals.values.size() != h.grid.element_count())
    raise(errc::shape_mismatch, "residual count does not match the grid");
  ErrorEstimate est;
  est.norm = spec.norm;
  est.smoothness = spec.smoothness;
  est.certified = estimate_certified(spec);

  if (spec.norm == Norm::s && spec.smoothness != 0.0) {
    // Level-weighted coefficient aggregate; computable without the inverse.
    const std::size_t d = h.ndims();
    std::vector<double> level_sumsq(h.nlevels + 1, 0.0);
    const auto& v = residuals.values;
    std::vector<std::size_t> idx(d, 0);
    std::size_t flat = 0;
    for (;;) {
      const std::uint8_t tag = h.level_tag(idx.data());
      level_sumsq[tag] += v[flat] * v[flat];
      ++flat;
      std::size_t a = d;
      bool done = true;
      while (a-- > 0) {
        if (++idx[a] < h.grid.shape[a]) {
          done = false;
          break;
        }
        idx[a] = 0;
      }
      if (done) break;
    }
    double acc = 0.0;
    const double L = static_cast<double>(h.nlevels);
    for (std::size_t l = 0; l <= h.nlevels; ++l)
      acc += std::exp2(2.0 * spec.smoothness * (static_cast<double>(l) - L)) *
             level_sumsq[l];
    est.value = std::sqrt(acc / static_cast<double>(v.size()));
    return est;
  }

  MultilevelCoefficients tmp{residuals.values, &h};
  const std::vector<double> e = inverse_transform(tmp, policy);
  if (spec.norm == Norm::inf) est.value = kernels::max_abs(e, policy);
  else est.value = rms(e, policy);
  return est;
}

ErrorEstimate segment_estimator(std::span<const std::uint32_t> planes_fetched,
                                std::span<const int> level_exponents,
                                std::uint32_t total_planes,
                                const ErrorSpec& spec, const GridHierarchy& h) {
  if (planes_fetched.size() != h.nlevels + 1 ||
      level_exponents.size() != h.nlevels + 1)
    raise(errc::shape_mismatch, "per-level state does not match the hierarchy");
  for (std::size_t l = 0; l < planes_fetched.size(); ++l)
    if (planes_fetched[l] > total_planes)
      raise(errc::invalid_state,
            "level " + std::to_string(l) + " claims " +
                std::to_string(planes_fetched[l]) + " planes of " +
                std::to_string(total_planes));

  // Residual magnitude bound per level: 2^(e_l - b_l + 1); empty levels
  // contribute nothing.
  std::vector<double> rho(h.nlevels + 1, 0.0);
  for (std::size_t l = 0; l <= h.nlevels; ++l) {
    if (level_exponents[l] == empty_level_exponent) continue;
    rho[l] = std::ldexp(1.0, level_exponents[l] -
                                 static_cast<int>(planes_fetched[l]) + 1);
  }

  ErrorEstimate est;
  est.norm = spec.norm;
  est.smoothness = spec.smoothness;
  est.certified = estimate_certified(spec);

  if (spec.norm == Norm::inf) {
    const double cells = std::ldexp(1.0, static_cast<int>(h.ndims()));
    double acc = rho[0];
    for (std::size_t l = 1; l <= h.nlevels; ++l) acc += cells * rho[l];
    est.value = acc;
    return est;
  }
  double acc = 0.0;
  const double L = static_cast<double>(h.nlevels);
  const double n = static_cast<double>(h.grid.element_count());
  for (std::size_t l = 0; l <= h.nlevels; ++l)
    acc += std::exp2(2.0 * spec.smoothness * (static_cast<double>(l) - L)) *
           rho[l] * rho[l] * static_cast<double>(h.level_node_counts[l]) / n;
  est.value = std::sqrt(acc);
  return est;
}

} // namespace mgrc
