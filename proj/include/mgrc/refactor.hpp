#ifndef MGRC_REFACTOR_HPP
#define MGRC_REFACTOR_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mgrc/container.hpp"
#include "mgrc/error_control.hpp"
#include "mgrc/exec.hpp"
#include "mgrc/grid.hpp"

namespace mgrc {

struct SegmentId {
  std::uint32_t level = 0;
  std::uint32_t plane = 0;
  bool operator==(const SegmentId&) const = default;
};

struct SegmentMeta {
  std::uint64_t byte_size = 0;    // encoded payload bytes
  std::uint64_t raw_bits = 0;     // bits before encoding
  std::uint32_t checksum = 0;     // crc32 of the encoded payload
  std::string file_name;          // l{level}_b{plane}.bin
};

// Everything a reader needs: no access to the original array. Exponents use
// empty_level_exponent for levels whose coefficients are all zero. Value
// stats (min/max/rms) let a reader resolve relative tolerances.
struct StoreManifest {
  DType dtype = DType::f64;
  std::vector<std::size_t> shape;
  std::vector<std::vector<double>> coords; // empty = default grid
  std::size_t nlevels = 0;
  std::uint32_t planes = 32; // B
  std::vector<int> level_exponents;
  std::vector<std::uint64_t> level_counts;
  double value_min = 0.0, value_max = 0.0, value_rms = 0.0;
  std::vector<std::vector<SegmentMeta>> segments; // [level][plane]

  TensorGrid grid() const;
};

// Per-(level, bitplane) precision segments. Plane 0 interleaves the sign bit
// with the most significant magnitude bit (two bits per coefficient); planes
// 1..B-1 carry one bit per coefficient, node scan order, packed MSB-first.
// Each segment is canonical-Huffman encoded.
struct RefactoredStore {
  StoreManifest manifest;
  std::vector<std::vector<std::vector<std::uint8_t>>> segments; // payloads
};

// Reader-side record of which planes have been applied, plus the fixed-point
// accumulators they produced. Planes are consumed in order per level.
struct RetrievalState {
  std::vector<std::uint32_t> planes_fetched;           // b_l
  std::vector<std::vector<std::uint64_t>> magnitudes;  // per level, scan order
  std::vector<std::vector<std::uint8_t>> signs;
  ErrorEstimate accrued;
};

struct SegmentRequest {
  std::vector<SegmentId> segments; // fetch order
  ErrorEstimate predicted;         // estimator after the whole request
  bool satisfiable = true;         // false: even full retrieval exceeds tol
  std::uint64_t total_bytes = 0;
};

using SegmentSource =
    std::function<std::vector<std::uint8_t>(std::uint32_t level,
                                            std::uint32_t plane)>;

inline constexpr std::uint32_t min_planes = 8;
inline constexpr std::uint32_t max_planes = 60;
inline constexpr std::uint32_t default_planes = 32;

RefactoredStore refactor(std::span<const double> u, const TensorGrid& grid,
                         std::uint32_t planes = default_planes,
                         exec policy = exec::parallel);

RetrievalState make_initial_state(const StoreManifest& manifest);

// Greedy plan: repeatedly take the unfetched segment with the best estimator
// decrease per byte (ties to the lower level, then lower plane) until the
// estimator reaches tol_abs or the store is exhausted. Pure planning.
SegmentRequest request(const StoreManifest& manifest, double tol_abs,
                       Norm norm, double smoothness,
                       const RetrievalState& state);

// Applies the requested segments to the state (checksum and per-level prefix
// order enforced), then synthesizes the refined field through the inverse
// transform. Returns the field; the state is updated in place.
std::vector<double> reconstruct(const StoreManifest& manifest,
                                const SegmentSource& source,
                                const SegmentRequest& req,
                                RetrievalState& state,
                                exec policy = exec::parallel);

// Store directory layout: manifest.json plus one l{level}_b{plane}.bin per
// segment, each file = u32 crc32 | u64 raw bit count | encoded payload.
void write_store(const RefactoredStore& store,
                 const std::filesystem::path& dir);
StoreManifest read_manifest(const std::filesystem::path& dir);
SegmentSource directory_source(const std::filesystem::path& dir,
                               const StoreManifest& manifest);

std::string manifest_to_json(const StoreManifest& manifest);
StoreManifest manifest_from_json(const std::string& text);

// Retrieval state round-trips through a small JSON document; accumulators
// are rebuilt by replaying the recorded planes from the store.
std::string state_to_json(const RetrievalState& state);
RetrievalState state_from_json(const StoreManifest& manifest,
                               const SegmentSource& source,
                               const std::string& text);

// Test hooks for the fixed-point layer.
namespace bitplane {
// Smallest e with max|coeff| <= 2^e; empty_level_exponent when max is 0.
int level_exponent(double max_abs);
// B fractional bits of |c| / 2^e, truncated, saturated at 2^B - 1.
std::uint64_t magnitude(double c, int exponent, std::uint32_t planes);
// Packs bit (B-1-p) of every magnitude (plane 0 interleaves signs).
std::vector<std::uint8_t> pack_plane(std::span<const std::uint64_t> mags,
                                     std::span<const std::uint8_t> signs,
                                     std::uint32_t plane, std::uint32_t planes,
                                     std::uint64_t& bit_count);
} // namespace bitplane

} // namespace mgrc

#endif
