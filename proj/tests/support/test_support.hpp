#ifndef MGRC_TEST_SUPPORT_HPP
#define MGRC_TEST_SUPPORT_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "mgrc/grid.hpp"
#include "mgrc/transform.hpp"

namespace mgrc::test {

// mt19937_64 output is pinned by the standard; the [0,1) mapping below uses
// raw bits so generated fields are identical on every platform (needed for
// golden files and recorded baselines).
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t bits() { return gen_(); }
  std::int64_t integer(std::int64_t lo, std::int64_t hi) { // inclusive
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(gen_() % span);
  }

private:
  std::mt19937_64 gen_;
};

inline std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

// Smooth multi-frequency field over the unit cube.
inline std::vector<double> multisine(const std::vector<std::size_t>& shape) {
  const std::size_t d = shape.size();
  std::vector<double> u(element_count(shape));
  std::vector<std::size_t> idx(d, 0);
  constexpr double tau = 2.0 * std::numbers::pi;
  for (std::size_t flat = 0; flat < u.size(); ++flat) {
    double t[4] = {0, 0, 0, 0};
    for (std::size_t a = 0; a < d; ++a)
      t[a] = static_cast<double>(idx[a]) / static_cast<double>(shape[a] - 1);
    u[flat] = std::sin(tau * (1.0 * t[0] + 0.7 * t[1] + 0.4 * t[2])) +
              0.5 * std::sin(tau * (3.0 * t[0] + 2.2 * t[1])) +
              0.25 * std::sin(tau * (7.0 * t[0] + 5.0 * t[3])) + 1.5 * t[0];
    std::size_t a = d;
    while (a-- > 0) {
      if (++idx[a] < shape[a]) break;
      idx[a] = 0;
    }
  }
  return u;
}

inline std::vector<double> random_field(const std::vector<std::size_t>& shape,
                                        Rng& rng, double lo = -1.0,
                                        double hi = 1.0) {
  std::vector<double> u(element_count(shape));
  for (double& v : u) v = rng.uniform(lo, hi);
  return u;
}

inline std::vector<double> multisine_noisy(
    const std::vector<std::size_t>& shape, Rng& rng, double noise = 0.05) {
  std::vector<double> u = multisine(shape);
  for (double& v : u) v += noise * rng.uniform(-1.0, 1.0);
  return u;
}

inline std::vector<double> spike_field(const std::vector<std::size_t>& shape) {
  std::vector<double> u(element_count(shape), 0.0);
  u[u.size() / 2] = 1.0;
  return u;
}

inline std::vector<double> increasing_coords(std::size_t n, Rng& rng) {
  std::vector<double> x(n);
  double at = rng.uniform(-2.0, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = at;
    at += rng.uniform(0.05, 1.0);
  }
  return x;
}

inline double max_abs_diff(const std::vector<double>& a,
                           const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

inline double range_of(const std::vector<double>& u) {
  double mn = u[0], mx = u[0];
  for (double v : u) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  return mx - mn;
}

inline double rms_of(const std::vector<double>& u) {
  double s = 0.0;
  for (double v : u) s += v * v;
  return std::sqrt(s / static_cast<double>(u.size()));
}

// Independent dense evaluation of the inverse transform: expands the
// hierarchical tensor hat basis directly, one term per (level, new node).
// Quadratic; use on small shapes only.
inline std::vector<double> dense_inverse_oracle(
    const MultilevelCoefficients& c) {
  const GridHierarchy& h = *c.hierarchy;
  const std::size_t d = h.ndims();
  const std::size_t n = h.grid.element_count();

  // 1-D hat on the level-l axis grid centered at finest index m, evaluated
  // at the coordinate of finest index k.
  auto hat = [&h](std::size_t level, std::size_t axis, std::size_t m,
                  std::size_t k) -> double {
    const auto& set = h.level_index_sets[level][axis];
    const auto& x = h.grid.coords[axis];
    const double y = x[k];
    // Position of m within the set.
    std::size_t pm = 0;
    while (set[pm] != m) ++pm;
    const double xm = x[m];
    if (y == xm) return 1.0;
    if (y < xm) {
      if (pm == 0) return 0.0;
      const double xl = x[set[pm - 1]];
      if (y <= xl) return 0.0;
      return (y - xl) / (xm - xl);
    }
    if (pm + 1 >= set.size()) return 0.0;
    const double xr = x[set[pm + 1]];
    if (y >= xr) return 0.0;
    return (xr - y) / (xr - xm);
  };

  std::vector<double> out(n, 0.0);
  std::vector<std::size_t> stride(d, 1);
  for (std::size_t a = d - 1; a-- > 0;)
    stride[a] = stride[a + 1] * h.grid.shape[a + 1];

  for (std::size_t l = 0; l <= h.nlevels; ++l) {
    for (const auto& node : new_nodes(h, l)) {
      std::size_t src = 0;
      for (std::size_t a = 0; a < d; ++a) src += node[a] * stride[a];
      const double r = c.values[src];
      if (r == 0.0) continue;
      // Evaluate the tensor hat at every grid node.
      std::vector<std::size_t> idx(d, 0);
      for (std::size_t flat = 0; flat < n; ++flat) {
        double w = 1.0;
        for (std::size_t a = 0; a < d && w != 0.0; ++a)
          w *= hat(l, a, node[a], idx[a]);
        out[flat] += r * w;
        std::size_t a = d;
        while (a-- > 0) {
          if (++idx[a] < h.grid.shape[a]) break;
          idx[a] = 0;
        }
      }
    }
  }
  return out;
}

} // namespace mgrc::test

#endif
