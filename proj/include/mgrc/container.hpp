#ifndef MGRC_CONTAINER_HPP
#define MGRC_CONTAINER_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mgrc/codec.hpp"
#include "mgrc/error_control.hpp"
#include "mgrc/exec.hpp"
#include "mgrc/grid.hpp"

namespace mgrc {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

inline std::size_t dtype_size(DType t) { return t == DType::f32 ? 4 : 8; }

// Self-describing compressed buffer. Layout (little-endian):
//   magic "MGRC" | version u16 | flags u8 | dtype u8 | ndims u8 |
//   shape u64 x ndims | [per axis: count u64 + coords f64 x count, iff
//   flags bit1] | mode u8 | norm u8 | s f64 | tol f64 | nlevels u8 |
//   bin_widths f64 x (nlevels+1) | codec u8 | payload_len u64 | crc32 u32 |
//   payload
// flags bit0 = constant field (payload is a single f64), bit1 = coords
// present. Decompression needs nothing beyond the buffer itself.
struct CompressedContainer {
  std::vector<std::uint8_t> bytes;
};

inline constexpr std::uint16_t container_version = 1;

// Parsed header; payload untouched.
struct ContainerInfo {
  std::uint16_t version = container_version;
  bool constant_field = false;
  bool coords_present = false;
  DType dtype = DType::f64;
  std::vector<std::uint64_t> shape;
  std::vector<std::vector<double>> coords; // empty unless coords_present
  ErrorSpec spec;
  std::uint8_t nlevels = 0;
  std::vector<double> bin_widths;
  std::uint8_t codec_id = 0;
  std::uint64_t payload_len = 0;
  std::uint32_t checksum = 0;
  std::uint64_t header_size = 0;
};

struct DecompressedArray {
  DType dtype = DType::f64;
  std::vector<std::uint64_t> shape;
  std::variant<std::vector<float>, std::vector<double>> values;

  std::span<const double> f64() const {
    return std::get<std::vector<double>>(values);
  }
  std::span<const float> f32() const {
    return std::get<std::vector<float>>(values);
  }
};

// Single-shot pipeline: hierarchy, forward transform, bin widths, quantize,
// a posteriori error check with a halving shrink loop (at most 10 passes),
// lossless encode. Constant fields become a header-only container.
CompressedContainer compress(std::span<const double> u, const TensorGrid& grid,
                             const ErrorSpec& spec, Codec codec,
                             exec policy = exec::parallel);
CompressedContainer compress(std::span<const float> u, const TensorGrid& grid,
                             const ErrorSpec& spec, Codec codec,
                             exec policy = exec::parallel);

DecompressedArray decompress(std::span<const std::uint8_t> container,
                             exec policy = exec::parallel);

// Header-only parse (validates magic/version/structure, not the checksum).
ContainerInfo inspect(std::span<const std::uint8_t> container);

// Stable key:value rendering of a header, one field per line.
std::string describe(const ContainerInfo& info);

} // namespace mgrc

#endif
