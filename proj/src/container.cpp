#include "mgrc/container.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "mgrc/bytes.hpp"
#include "mgrc/error.hpp"
#include "mgrc/quantize.hpp"
#include "mgrc/transform.hpp"

namespace mgrc {

namespace {

constexpr char magic[4] = {'M', 'G', 'R', 'C'};
constexpr int max_shrink_passes = 10;
// The a posteriori estimate equals the decompressor's error field up to a
// few ulps; the shave keeps the bound strict on the real output.
constexpr double bound_slack = 1.0 - 1e-9;

std::string format_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void append_header(std::vector<std::uint8_t>& out, const TensorGrid& grid,
                   DType dtype, bool constant, const ErrorSpec& spec,
                   const LevelBudget& budget, Codec codec,
                   std::uint64_t payload_len, std::uint32_t checksum) {
  out.insert(out.end(), magic, magic + 4);
  put_u16(out, container_version);
  std::uint8_t flags = 0;
  if (constant) flags |= 1u;
  if (grid.explicit_coords) flags |= 2u;
  put_u8(out, flags);
  put_u8(out, static_cast<std::uint8_t>(dtype));
  put_u8(out, static_cast<std::uint8_t>(grid.ndims()));
  for (std::size_t s : grid.shape) put_u64(out, s);
  if (grid.explicit_coords)
    for (const auto& axis : grid.coords) {
      put_u64(out, axis.size());
      for (double x : axis) put_f64(out, x);
    }
  put_u8(out, static_cast<std::uint8_t>(spec.mode));
  put_u8(out, static_cast<std::uint8_t>(spec.norm));
  put_f64(out, spec.norm == Norm::s ? spec.smoothness : 0.0);
  put_f64(out, spec.tol);
  put_u8(out, static_cast<std::uint8_t>(budget.bin_widths.size() - 1));
  for (double w : budget.bin_widths) put_f64(out, w);
  put_u8(out, static_cast<std::uint8_t>(codec));
  put_u64(out, payload_len);
  put_u32(out, checksum);
}

CompressedContainer constant_container(const TensorGrid& grid, DType dtype,
                                       const ErrorSpec& spec, Codec codec,
                                       double value) {
  std::vector<std::uint8_t> payload;
  put_f64(payload, value);
  CompressedContainer c;
  LevelBudget dummy;
  dummy.bin_widths = {0.0};
  append_header(c.bytes, grid, dtype, true, spec, dummy, codec,
                payload.size(), crc32(payload));
  c.bytes.insert(c.bytes.end(), payload.begin(), payload.end());
  return c;
}

CompressedContainer compress_f64(std::span<const double> u,
                                 const TensorGrid& grid, const ErrorSpec& spec,
                                 Codec codec, DType dtype,
                                 std::span<const float> f32_source,
                                 exec policy) {
  if (u.size() != grid.element_count())
    raise(errc::shape_mismatch, "array does not match the grid");
  if (kernels::any_non_finite(u, policy))
    raise(errc::non_finite_input, "input contains NaN or Inf");
  if (!(spec.tol > 0.0)) raise(errc::invalid_state, "tolerance must be > 0");

  const auto mm = kernels::minmax(u, policy);
  if (mm.max == mm.min)
    return constant_container(grid, dtype, spec, codec, mm.max);

  const double tau_abs = absolute_tolerance(spec, u, policy);
  const GridHierarchy h = build_hierarchy(grid);
  const MultilevelCoefficients coeffs = forward_transform(u, h, policy);

  LevelBudget budget = initial_bin_widths(tau_abs, spec, h);
  QuantizeResult qr;
  bool accepted = false;
  for (int pass = 0; pass < max_shrink_passes; ++pass) {
    qr = quantize(coeffs, budget, policy);
    double achieved;
    if (dtype == DType::f32 &&
        !(spec.norm == Norm::s && spec.smoothness != 0.0)) {
      // Measure the bound on the cast-back output: the float cast adds up to
      // half an ulp that the coefficient residuals cannot see.
      const std::vector<double> err =
          inverse_transform(qr.residuals, policy);
      std::vector<double> cast_err(err.size());
      for (std::size_t i = 0; i < err.size(); ++i)
        cast_err[i] = static_cast<double>(f32_source[i]) -
                      static_cast<double>(static_cast<float>(u[i] - err[i]));
      if (spec.norm == Norm::inf)
        achieved = kernels::max_abs(cast_err, policy);
      else
        achieved = std::sqrt(kernels::sum_squares(cast_err, policy) /
                             static_cast<double>(cast_err.size()));
    } else {
      achieved = achieved_error(qr.residuals, spec, h, policy).value;
    }
    if (achieved <= tau_abs * bound_slack) {
      accepted = true;
      break;
    }
    for (double& w : budget.bin_widths) w *= 0.5;
  }
  if (!accepted)
    raise(errc::tolerance_unreachable,
          "bin shrink loop exhausted after " +
              std::to_string(max_shrink_passes) + " passes");

  const LosslessBlock block = lossless_encode(qr.q.qvalues, codec);
  CompressedContainer c;
  append_header(c.bytes, grid, dtype, false, spec, qr.q.budget, codec,
                block.payload.size(), crc32(block.payload));
  c.bytes.insert(c.bytes.end(), block.payload.begin(), block.payload.end());
  return c;
}

ContainerInfo parse_header(ByteReader& r) {
  ContainerInfo info;
  const auto m = r.take(4);
  if (std::memcmp(m.data(), magic, 4) != 0)
    raise(errc::bad_magic, "not an MGRC container");
  info.version = r.u16();
  if (info.version != container_version)
    raise(errc::unsupported_version,
          "container version " + std::to_string(info.version));
  const std::uint8_t flags = r.u8();
  if (flags & ~0x03u) raise(errc::corrupt_stream, "unknown header flags");
  info.constant_field = (flags & 1u) != 0;
  info.coords_present = (flags & 2u) != 0;
  const std::uint8_t dtype = r.u8();
  if (dtype > 1) raise(errc::corrupt_stream, "unknown element type");
  info.dtype = static_cast<DType>(dtype);
  const std::uint8_t ndims = r.u8();
  if (ndims < 1 || ndims > max_dims)
    raise(errc::corrupt_stream, "dimension count out of range");
  info.shape.resize(ndims);
  std::uint64_t count = 1;
  for (auto& s : info.shape) {
    s = r.u64();
    if (s < 2) raise(errc::corrupt_stream, "axis shorter than 2 nodes");
    if (s > (std::uint64_t{1} << 40) / count)
      raise(errc::corrupt_stream, "implausible shape");
    count *= s;
  }
  if (info.coords_present) {
    info.coords.resize(ndims);
    for (std::size_t a = 0; a < ndims; ++a) {
      const std::uint64_t n = r.u64();
      if (n != info.shape[a])
        raise(errc::corrupt_stream, "coordinate count mismatch");
      info.coords[a].resize(n);
      for (auto& x : info.coords[a]) x = r.f64();
    }
  }
  const std::uint8_t mode = r.u8();
  if (mode > 1) raise(errc::corrupt_stream, "unknown error-bound mode");
  info.spec.mode = static_cast<Mode>(mode);
  const std::uint8_t norm = r.u8();
  if (norm > 1) raise(errc::corrupt_stream, "unknown norm");
  info.spec.norm = static_cast<Norm>(norm);
  info.spec.smoothness = r.f64();
  info.spec.tol = r.f64();
  info.nlevels = r.u8();
  info.bin_widths.resize(static_cast<std::size_t>(info.nlevels) + 1);
  for (auto& w : info.bin_widths) w = r.f64();
  info.codec_id = r.u8();
  if (info.codec_id > 2) raise(errc::corrupt_stream, "unknown codec id");
  info.payload_len = r.u64();
  info.checksum = r.u32();
  info.header_size = r.position();
  return info;
}

} // namespace

CompressedContainer compress(std::span<const double> u, const TensorGrid& grid,
                             const ErrorSpec& spec, Codec codec, exec policy) {
  return compress_f64(u, grid, spec, codec, DType::f64, {}, policy);
}

CompressedContainer compress(std::span<const float> u, const TensorGrid& grid,
                             const ErrorSpec& spec, Codec codec, exec policy) {
  std::vector<double> widened(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    widened[i] = static_cast<double>(u[i]);
  return compress_f64(widened, grid, spec, codec, DType::f32, u, policy);
}

ContainerInfo inspect(std::span<const std::uint8_t> container) {
  ByteReader r(container);
  return parse_header(r);
}

DecompressedArray decompress(std::span<const std::uint8_t> container,
                             exec policy) {
  ByteReader r(container);
  const ContainerInfo info = parse_header(r);
  if (info.payload_len != r.remaining())
    raise(errc::corrupt_stream, "payload length mismatch");
  const auto payload = r.take(info.payload_len);
  if (crc32(payload) != info.checksum)
    raise(errc::checksum_mismatch, "payload checksum failed");

  DecompressedArray out;
  out.dtype = info.dtype;
  out.shape = info.shape;
  std::size_t count = 1;
  for (std::uint64_t s : info.shape) count *= s;

  std::vector<double> values;
  if (info.constant_field) {
    if (info.payload_len != 8)
      raise(errc::corrupt_stream, "constant payload must be 8 bytes");
    ByteReader p(payload);
    values.assign(count, p.f64());
  } else {
    std::vector<std::size_t> shape(info.shape.begin(), info.shape.end());
    const TensorGrid grid = info.coords_present
                                ? make_grid(shape, info.coords)
                                : make_grid(shape);
    const GridHierarchy h = build_hierarchy(grid);
    if (info.nlevels != h.nlevels)
      raise(errc::corrupt_stream, "level count does not match the shape");

    LosslessBlock block;
    block.codec_id = info.codec_id;
    block.payload.assign(payload.begin(), payload.end());
    block.original_count = count;
    QuantizedCoefficients q;
    q.qvalues = lossless_decode(block);
    q.budget.bin_widths = info.bin_widths;
    const MultilevelCoefficients coeffs = dequantize(q, h, policy);
    values = inverse_transform(coeffs, policy);
  }

  if (info.dtype == DType::f32) {
    std::vector<float> narrowed(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
      narrowed[i] = static_cast<float>(values[i]);
    out.values = std::move(narrowed);
  } else {
    out.values = std::move(values);
  }
  return out;
}

std::string describe(const ContainerInfo& info) {
  std::string s;
  auto line = [&s](const std::string& key, const std::string& value) {
    s += key;
    s += ": ";
    s += value;
    s += "\n";
  };
  line("format", "mgrc-container");
  line("version", std::to_string(info.version));
  line("constant_field", info.constant_field ? "1" : "0");
  line("coords_present", info.coords_present ? "1" : "0");
  line("dtype", info.dtype == DType::f32 ? "f32" : "f64");
  line("ndims", std::to_string(info.shape.size()));
  std::string shape;
  for (std::size_t a = 0; a < info.shape.size(); ++a) {
    if (a) shape += "x";
    shape += std::to_string(info.shape[a]);
  }
  line("shape", shape);
  line("mode", info.spec.mode == Mode::abs ? "abs" : "rel");
  line("norm", info.spec.norm == Norm::inf ? "inf" : "s");
  line("s", format_g17(info.spec.smoothness));
  line("tol", format_g17(info.spec.tol));
  line("nlevels", std::to_string(info.nlevels));
  std::string widths;
  for (std::size_t l = 0; l < info.bin_widths.size(); ++l) {
    if (l) widths += ",";
    widths += format_g17(info.bin_widths[l]);
  }
  line("bin_widths", widths);
  line("codec", std::to_string(info.codec_id));
  line("header_bytes", std::to_string(info.header_size));
  line("payload_bytes", std::to_string(info.payload_len));
  line("crc32", std::to_string(info.checksum));
  return s;
}

} // namespace mgrc
