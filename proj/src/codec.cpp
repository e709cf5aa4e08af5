#include "mgrc/codec.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <queue>
#include <string>

#include "mgrc/bytes.hpp"
#include "mgrc/error.hpp"

namespace mgrc {

std::uint32_t crc32(std::span<const std::uint8_t> data) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k)
        c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::uint8_t b : data) c = table[(c ^ b) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

namespace {

constexpr int max_code_len = 15;
constexpr std::uint32_t kraft_one = 1u << max_code_len;

std::uint64_t zigzag(std::int64_t v) {
  return (static_cast<std::uint64_t>(v) << 1) ^
         static_cast<std::uint64_t>(v >> 63);
}
std::int64_t unzigzag(std::uint64_t u) {
  return static_cast<std::int64_t>(u >> 1) ^
         -static_cast<std::int64_t>(u & 1u);
}

void put_varint(std::vector<std::uint8_t>& out, std::uint64_t u) {
  while (u >= 0x80u) {
    out.push_back(static_cast<std::uint8_t>(u) | 0x80u);
    u >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(u));
}

// Byte supplier for the varint reader: either a plain span or a Huffman
// code stream decoded on demand.
class ByteSource {
public:
  virtual ~ByteSource() = default;
  virtual std::uint8_t next() = 0;
  // After the consumer is done: true when nothing but zero padding remains.
  virtual bool exhausted_clean() const = 0;
};

class SpanSource final : public ByteSource {
public:
  explicit SpanSource(std::span<const std::uint8_t> data) : data_(data) {}
  std::uint8_t next() override {
    if (pos_ >= data_.size()) raise(errc::corrupt_stream, "truncated varint stream");
    return data_[pos_++];
  }
  bool exhausted_clean() const override { return pos_ == data_.size(); }

private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::uint64_t read_varint(ByteSource& src) {
  std::uint64_t v = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    const std::uint8_t b = src.next();
    if (shift == 63 && (b & 0xFEu))
      raise(errc::corrupt_stream, "varint overflows 64 bits");
    v |= static_cast<std::uint64_t>(b & 0x7Fu) << shift;
    if ((b & 0x80u) == 0) return v;
  }
  raise(errc::corrupt_stream, "varint continuation too long");
}

// ---- canonical Huffman over bytes ----------------------------------------

struct CodeTable {
  std::array<std::uint8_t, 256> lengths{};
  std::array<std::uint32_t, 256> codes{};
  int max_len = 0;
  std::uint16_t symbol_count = 0;
};

// Huffman code lengths with deterministic tie-breaking (leaves order by
// symbol value, internal nodes by creation order), length-limited to 15 by a
// Kraft repair pass.
std::array<std::uint8_t, 256> build_lengths(
    const std::array<std::uint64_t, 256>& freq) {
  std::array<std::uint8_t, 256> lengths{};
  std::vector<int> symbols;
  for (int s = 0; s < 256; ++s)
    if (freq[static_cast<std::size_t>(s)] > 0) symbols.push_back(s);
  if (symbols.empty()) return lengths;
  if (symbols.size() == 1) {
    lengths[static_cast<std::size_t>(symbols[0])] = 1;
    return lengths;
  }

  struct Node {
    std::uint64_t freq;
    int key; // 0..255 leaves, then creation order
    int left = -1, right = -1;
  };
  std::vector<Node> nodes;
  auto cmp = [&nodes](int a, int b) {
    if (nodes[static_cast<std::size_t>(a)].freq !=
        nodes[static_cast<std::size_t>(b)].freq)
      return nodes[static_cast<std::size_t>(a)].freq >
             nodes[static_cast<std::size_t>(b)].freq;
    return nodes[static_cast<std::size_t>(a)].key >
           nodes[static_cast<std::size_t>(b)].key;
  };
  std::priority_queue<int, std::vector<int>, decltype(cmp)> heap(cmp);
  for (int s : symbols) {
    nodes.push_back({freq[static_cast<std::size_t>(s)], s, -1, -1});
    heap.push(static_cast<int>(nodes.size()) - 1);
  }
  int next_key = 256;
  while (heap.size() > 1) {
    const int a = heap.top();
    heap.pop();
    const int b = heap.top();
    heap.pop();
    nodes.push_back({nodes[static_cast<std::size_t>(a)].freq +
                         nodes[static_cast<std::size_t>(b)].freq,
                     next_key++, a, b});
    heap.push(static_cast<int>(nodes.size()) - 1);
  }
  // Depth-first depth assignment.
  std::vector<std::pair<int, int>> stack{{heap.top(), 0}};
  while (!stack.empty()) {
    const auto [n, depth] = stack.back();
    stack.pop_back();
    const Node& node = nodes[static_cast<std::size_t>(n)];
    if (node.left < 0) {
      lengths[static_cast<std::size_t>(node.key)] =
          static_cast<std::uint8_t>(depth);
      continue;
    }
    stack.push_back({node.left, depth + 1});
    stack.push_back({node.right, depth + 1});
  }

  // Length-limit: clamp, then restore Kraft equality.
  std::uint64_t kraft = 0;
  for (int s : symbols) {
    auto& len = lengths[static_cast<std::size_t>(s)];
    if (len > max_code_len) len = max_code_len;
    kraft += kraft_one >> len;
  }
  while (kraft > kraft_one) {
    // Deepen the longest still-extendable code; largest symbol on ties.
    int pick = -1;
    for (int s : symbols) {
      const int len = lengths[static_cast<std::size_t>(s)];
      if (len < max_code_len &&
          (pick < 0 || len > lengths[static_cast<std::size_t>(pick)] ||
           (len == lengths[static_cast<std::size_t>(pick)] && s > pick)))
        pick = s;
    }
    kraft -= kraft_one >> (lengths[static_cast<std::size_t>(pick)] + 1);
    ++lengths[static_cast<std::size_t>(pick)];
  }
  while (kraft < kraft_one) {
    // Shorten the deepest code whose promotion still fits; smallest symbol
    // on ties.
    int pick = -1;
    for (int s : symbols) {
      const int len = lengths[static_cast<std::size_t>(s)];
      if (len > 1 && kraft + (kraft_one >> len) <= kraft_one &&
          (pick < 0 || len > lengths[static_cast<std::size_t>(pick)]))
        pick = s;
    }
    if (pick < 0) raise(errc::corrupt_stream, "internal: kraft repair failed");
    kraft += kraft_one >> lengths[static_cast<std::size_t>(pick)];
    --lengths[static_cast<std::size_t>(pick)];
  }
  return lengths;
}

// Canonical code assignment: sort by (length, symbol), sequential codes.
CodeTable canonical_codes(const std::array<std::uint8_t, 256>& lengths) {
  CodeTable t;
  t.lengths = lengths;
  std::array<std::uint16_t, max_code_len + 1> bl_count{};
  for (int s = 0; s < 256; ++s) {
    const int len = lengths[static_cast<std::size_t>(s)];
    if (len > 0) {
      ++bl_count[static_cast<std::size_t>(len)];
      ++t.symbol_count;
      if (len > t.max_len) t.max_len = len;
    }
  }
  std::array<std::uint32_t, max_code_len + 2> next_code{};
  std::uint32_t code = 0;
  for (int len = 1; len <= t.max_len; ++len) {
    code = (code + bl_count[static_cast<std::size_t>(len - 1)]) << 1;
    next_code[static_cast<std::size_t>(len)] = code;
  }
  for (int s = 0; s < 256; ++s) {
    const int len = lengths[static_cast<std::size_t>(s)];
    if (len > 0)
      t.codes[static_cast<std::size_t>(s)] =
          next_code[static_cast<std::size_t>(len)]++;
  }
  return t;
}

class BitWriter {
public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}
  void put(std::uint32_t code, int len) {
    for (int i = len - 1; i >= 0; --i) {
      acc_ = static_cast<std::uint8_t>((acc_ << 1) | ((code >> i) & 1u));
      if (++nbits_ == 8) {
        out_.push_back(acc_);
        acc_ = 0;
        nbits_ = 0;
      }
    }
  }
  void pad_to_byte() {
    if (nbits_ > 0) {
      out_.push_back(static_cast<std::uint8_t>(acc_ << (8 - nbits_)));
      acc_ = 0;
      nbits_ = 0;
    }
  }

private:
  std::vector<std::uint8_t>& out_;
  std::uint8_t acc_ = 0;
  int nbits_ = 0;
};

// Canonical decoder: per-length first code and offset into the
// length-then-symbol sorted table.
class HuffmanDecoder {
public:
  explicit HuffmanDecoder(const std::array<std::uint8_t, 256>& lengths) {
    std::array<std::uint16_t, max_code_len + 1> bl_count{};
    for (int s = 0; s < 256; ++s) {
      const int len = lengths[static_cast<std::size_t>(s)];
      if (len > 0) {
        ++bl_count[static_cast<std::size_t>(len)];
        sorted_.push_back(
            {static_cast<std::uint8_t>(len), static_cast<std::uint8_t>(s)});
        if (len > max_len_) max_len_ = len;
      }
    }
    std::sort(sorted_.begin(), sorted_.end());
    std::uint64_t kraft = 0;
    for (const auto& e : sorted_) kraft += kraft_one >> e.first;
    if (sorted_.size() >= 2 && kraft != kraft_one)
      raise(errc::corrupt_stream, "Huffman table violates Kraft equality");
    if (sorted_.size() == 1 && sorted_[0].first != 1)
      raise(errc::corrupt_stream, "degenerate Huffman table");
    std::uint32_t code = 0;
    std::size_t index = 0;
    first_code_.assign(static_cast<std::size_t>(max_len_) + 1, 0);
    first_index_.assign(static_cast<std::size_t>(max_len_) + 1, 0);
    count_.assign(static_cast<std::size_t>(max_len_) + 1, 0);
    for (int len = 1; len <= max_len_; ++len) {
      code <<= 1;
      first_code_[static_cast<std::size_t>(len)] = code;
      first_index_[static_cast<std::size_t>(len)] = index;
      std::uint16_t c = bl_count[static_cast<std::size_t>(len)];
      count_[static_cast<std::size_t>(len)] = c;
      code += c;
      index += c;
    }
  }

  bool single_symbol() const { return sorted_.size() == 1; }
  std::uint8_t only_symbol() const { return sorted_[0].second; }

  template <class BitFn>
  std::uint8_t decode(BitFn next_bit) const {
    std::uint32_t code = 0;
    for (int len = 1; len <= max_len_; ++len) {
      code = (code << 1) | next_bit();
      const std::size_t l = static_cast<std::size_t>(len);
      if (count_[l] != 0 && code - first_code_[l] < count_[l])
        return sorted_[first_index_[l] + (code - first_code_[l])].second;
    }
    raise(errc::corrupt_stream, "invalid Huffman code");
  }

private:
  std::vector<std::pair<std::uint8_t, std::uint8_t>> sorted_; // (len, symbol)
  std::vector<std::uint32_t> first_code_;
  std::vector<std::size_t> first_index_;
  std::vector<std::uint32_t> count_;
  int max_len_ = 0;
};

void write_table_header(std::vector<std::uint8_t>& out, const CodeTable& t) {
  put_u16(out, t.symbol_count);
  put_u8(out, static_cast<std::uint8_t>(t.max_len));
  for (int s = 0; s < 256; s += 2)
    put_u8(out, static_cast<std::uint8_t>(
                    (t.lengths[static_cast<std::size_t>(s)] & 0x0Fu) |
                    (t.lengths[static_cast<std::size_t>(s + 1)] << 4)));
}

struct ParsedTable {
  std::array<std::uint8_t, 256> lengths{};
  std::uint16_t symbol_count = 0;
  std::uint8_t max_len = 0;
};

ParsedTable read_table_header(ByteReader& r) {
  ParsedTable t;
  t.symbol_count = r.u16();
  if (t.symbol_count == 0) {
    // Empty stream: no length table follows.
    if (r.u8() != 0) raise(errc::corrupt_stream, "nonzero max length for empty table");
    return t;
  }
  t.max_len = r.u8();
  if (t.max_len == 0 || t.max_len > max_code_len)
    raise(errc::corrupt_stream, "Huffman max code length out of range");
  std::uint16_t nonzero = 0;
  std::uint8_t observed_max = 0;
  for (int s = 0; s < 256; s += 2) {
    const std::uint8_t b = r.u8();
    const std::uint8_t lo = b & 0x0Fu;
    const std::uint8_t hi = b >> 4;
    t.lengths[static_cast<std::size_t>(s)] = lo;
    t.lengths[static_cast<std::size_t>(s + 1)] = hi;
    if (lo) { ++nonzero; observed_max = std::max(observed_max, lo); }
    if (hi) { ++nonzero; observed_max = std::max(observed_max, hi); }
  }
  if (nonzero != t.symbol_count)
    raise(errc::corrupt_stream, "Huffman symbol count mismatch");
  if (observed_max != t.max_len)
    raise(errc::corrupt_stream, "Huffman max code length mismatch");
  return t;
}

class HuffmanSource final : public ByteSource {
public:
  HuffmanSource(std::span<const std::uint8_t> packed) : reader_(packed) {
    const ParsedTable t = read_table_header(reader_);
    symbol_count_ = t.symbol_count;
    if (symbol_count_ > 0) decoder_.emplace(t.lengths);
    bits_ = reader_.take(reader_.remaining());
  }

  std::uint8_t next() override {
    if (symbol_count_ == 0)
      raise(errc::corrupt_stream, "read past empty Huffman stream");
    if (decoder_->single_symbol()) return decoder_->only_symbol();
    return decoder_->decode([this]() -> std::uint32_t { return next_bit(); });
  }

  bool exhausted_clean() const override {
    // Only zero padding may remain in the current byte, and no full bytes.
    if (bit_pos_ == 0) return byte_pos_ == bits_.size();
    if (byte_pos_ + 1 != bits_.size()) return false;
    return static_cast<std::uint8_t>(bits_[byte_pos_] << bit_pos_) == 0;
  }

private:
  std::uint32_t next_bit() {
    if (byte_pos_ >= bits_.size())
      raise(errc::corrupt_stream, "Huffman stream truncated");
    const std::uint32_t bit = (bits_[byte_pos_] >> (7 - bit_pos_)) & 1u;
    if (++bit_pos_ == 8) {
      bit_pos_ = 0;
      ++byte_pos_;
    }
    return bit;
  }

  ByteReader reader_;
  std::optional<HuffmanDecoder> decoder_;
  std::span<const std::uint8_t> bits_;
  std::size_t byte_pos_ = 0;
  int bit_pos_ = 0;
  std::uint16_t symbol_count_ = 0;
};

} // namespace

std::vector<std::uint8_t> huffman_pack_bytes(
    std::span<const std::uint8_t> in) {
  std::array<std::uint64_t, 256> freq{};
  for (std::uint8_t b : in) ++freq[b];
  const auto lengths = build_lengths(freq);
  const CodeTable table = canonical_codes(lengths);

  std::vector<std::uint8_t> out;
  if (table.symbol_count == 0) {
    put_u16(out, 0);
    put_u8(out, 0);
    return out;
  }
  write_table_header(out, table);
  if (table.symbol_count == 1) return out; // no data bits
  BitWriter bw(out);
  for (std::uint8_t b : in) bw.put(table.codes[b], table.lengths[b]);
  bw.pad_to_byte();
  return out;
}

std::vector<std::uint8_t> huffman_unpack_bytes(
    std::span<const std::uint8_t> packed, std::size_t expected_count) {
  HuffmanSource src(packed);
  std::vector<std::uint8_t> out;
  out.reserve(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) out.push_back(src.next());
  if (!src.exhausted_clean())
    raise(errc::corrupt_stream, "trailing data after Huffman stream");
  return out;
}

LosslessBlock lossless_encode(std::span<const std::int64_t> values,
                              Codec codec) {
  LosslessBlock block;
  block.codec_id = static_cast<std::uint8_t>(codec);
  block.original_count = values.size();
  switch (codec) {
  case Codec::raw:
    block.payload.reserve(values.size() * 8);
    for (std::int64_t v : values)
      put_u64(block.payload, static_cast<std::uint64_t>(v));
    return block;
  case Codec::varint:
    for (std::int64_t v : values) put_varint(block.payload, zigzag(v));
    return block;
  case Codec::huffman: {
    std::vector<std::uint8_t> varint_bytes;
    for (std::int64_t v : values) put_varint(varint_bytes, zigzag(v));
    block.payload = huffman_pack_bytes(varint_bytes);
    return block;
  }
  }
  raise(errc::unknown_codec, "codec " + std::to_string(block.codec_id));
}

std::vector<std::int64_t> lossless_decode(const LosslessBlock& block) {
  std::vector<std::int64_t> out;
  out.reserve(block.original_count);
  switch (static_cast<Codec>(block.codec_id)) {
  case Codec::raw: {
    if (block.payload.size() != block.original_count * 8)
      raise(errc::corrupt_stream, "raw payload length mismatch");
    ByteReader r(block.payload);
    for (std::uint64_t i = 0; i < block.original_count; ++i)
      out.push_back(static_cast<std::int64_t>(r.u64()));
    return out;
  }
  case Codec::varint: {
    SpanSource src(block.payload);
    for (std::uint64_t i = 0; i < block.original_count; ++i)
      out.push_back(unzigzag(read_varint(src)));
    if (!src.exhausted_clean())
      raise(errc::corrupt_stream, "trailing bytes after varint stream");
    return out;
  }
  case Codec::huffman: {
    HuffmanSource src(block.payload);
    for (std::uint64_t i = 0; i < block.original_count; ++i)
      out.push_back(unzigzag(read_varint(src)));
    if (!src.exhausted_clean())
      raise(errc::corrupt_stream, "trailing bits after Huffman stream");
    return out;
  }
  }
  raise(errc::unknown_codec, "codec " + std::to_string(block.codec_id));
}

} // namespace mgrc
