#ifndef MGRC_CODEC_HPP
#define MGRC_CODEC_HPP

#include <cstdint>
#include <span>
#include <vector>

namespace mgrc {

// Lossless byte encodings of the quantized integer stream.
//   0: raw little-endian int64
//   1: zigzag + LEB128 varint
//   2: zigzag + varint, then canonical Huffman over the varint bytes
enum class Codec : std::uint8_t { raw = 0, varint = 1, huffman = 2 };

struct LosslessBlock {
  std::uint8_t codec_id = 0;
  std::vector<std::uint8_t> payload;
  std::uint64_t original_count = 0; // number of int64 values
};

LosslessBlock lossless_encode(std::span<const std::int64_t> values,
                              Codec codec);
std::vector<std::int64_t> lossless_decode(const LosslessBlock& block);

// Canonical-Huffman byte layer (the codec-2 back end, also used for bitplane
// segments). Layout, little-endian: u16 symbol count | u8 max code length |
// 256 code lengths packed 4 bits each | MSB-first code stream padded with
// zero bits. Code lengths are package-limited to 15; ties in the canonical
// assignment break by symbol value. A stream with a single distinct symbol
// emits no data bits (the decoder replicates the symbol).
std::vector<std::uint8_t> huffman_pack_bytes(std::span<const std::uint8_t> in);
std::vector<std::uint8_t> huffman_unpack_bytes(
    std::span<const std::uint8_t> packed, std::size_t expected_count);

// CRC-32 (IEEE 802.3, reflected 0xEDB88320).
std::uint32_t crc32(std::span<const std::uint8_t> data);

} // namespace mgrc

#endif
