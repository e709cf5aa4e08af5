// mgrc: error-bounded compression and progressive refactoring of raw
// floating-point arrays. Subcommands: compress, decompress, refactor,
// recompose, inspect. Raw files are headerless little-endian arrays in
// row-major order (last axis fastest).

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mgrc/bytes.hpp"
#include "mgrc/chunking.hpp"
#include "mgrc/container.hpp"
#include "mgrc/error.hpp"
#include "mgrc/refactor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// ---- argument helpers ------------------------------------------------------

std::vector<std::size_t> parse_shape(const std::string& text) {
  std::vector<std::size_t> shape;
  std::size_t at = 0;
  while (at < text.size()) {
    std::size_t next = text.find('x', at);
    if (next == std::string::npos) next = text.size();
    const std::string part = text.substr(at, next - at);
    if (part.empty()) mgrc::raise(mgrc::errc::invalid_shape, "bad --shape");
    shape.push_back(static_cast<std::size_t>(std::stoull(part)));
    at = next + 1;
  }
  if (shape.empty()) mgrc::raise(mgrc::errc::invalid_shape, "bad --shape");
  return shape;
}

mgrc::ErrorSpec parse_spec(double tol, const std::string& s_text,
                           const std::string& mode_text) {
  mgrc::ErrorSpec spec;
  spec.tol = tol;
  if (s_text == "inf") {
    spec.norm = mgrc::Norm::inf;
  } else {
    spec.norm = mgrc::Norm::s;
    spec.smoothness = std::stod(s_text);
  }
  spec.mode = mode_text == "rel" ? mgrc::Mode::rel : mgrc::Mode::abs;
  return spec;
}

// ---- raw array I/O ---------------------------------------------------------

std::uint64_t file_size(const fs::path& p) {
  std::error_code ec;
  const auto n = fs::file_size(p, ec);
  if (ec) mgrc::raise(mgrc::errc::io_error, "cannot stat " + p.string());
  return n;
}

std::vector<std::uint8_t> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) mgrc::raise(mgrc::errc::io_error, "cannot read " + p.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const fs::path& p, std::span<const std::uint8_t> bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) mgrc::raise(mgrc::errc::io_error, "cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) mgrc::raise(mgrc::errc::io_error, "short write to " + p.string());
}

// Reads the block [ranges] of a row-major array, widened to double.
std::vector<double> read_block(const fs::path& p,
                               const std::vector<std::size_t>& shape,
                               mgrc::DType dtype,
                               const std::vector<mgrc::BlockRange>& ranges) {
  const std::size_t d = shape.size();
  const std::size_t unit = mgrc::dtype_size(dtype);
  std::vector<std::size_t> stride(d, 1);
  for (std::size_t a = d - 1; a-- > 0;) stride[a] = stride[a + 1] * shape[a + 1];

  std::size_t count = 1;
  for (const auto& r : ranges) count *= r.length();
  std::vector<double> out(count);

  std::ifstream in(p, std::ios::binary);
  if (!in) mgrc::raise(mgrc::errc::io_error, "cannot read " + p.string());

  const std::size_t run = ranges[d - 1].length();
  std::vector<std::uint8_t> row(run * unit);
  std::vector<std::size_t> pos(d, 0); // row index within the block
  std::size_t written = 0;
  for (;;) {
    std::size_t offset = ranges[d - 1].begin;
    for (std::size_t a = 0; a + 1 < d; ++a)
      offset += (ranges[a].begin + pos[a]) * stride[a];
    in.seekg(static_cast<std::streamoff>(offset * unit));
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size()));
    if (!in) mgrc::raise(mgrc::errc::io_error, "short read from " + p.string());
    if (dtype == mgrc::DType::f64) {
      for (std::size_t i = 0; i < run; ++i) {
        double v;
        std::memcpy(&v, row.data() + i * 8, 8);
        out[written++] = v;
      }
    } else {
      for (std::size_t i = 0; i < run; ++i) {
        float v;
        std::memcpy(&v, row.data() + i * 4, 4);
        out[written++] = static_cast<double>(v);
      }
    }
    if (d == 1) break;
    std::size_t a = d - 1;
    bool done = true;
    while (a-- > 0) {
      if (++pos[a] < ranges[a].length()) {
        done = false;
        break;
      }
      pos[a] = 0;
    }
    if (done) break;
  }
  return out;
}

// Writes the block [ranges] of a row-major array file (casting per dtype).
void write_block(std::fstream& out, const std::vector<std::size_t>& shape,
                 mgrc::DType dtype,
                 const std::vector<mgrc::BlockRange>& ranges,
                 std::span<const double> values) {
  const std::size_t d = shape.size();
  const std::size_t unit = mgrc::dtype_size(dtype);
  std::vector<std::size_t> stride(d, 1);
  for (std::size_t a = d - 1; a-- > 0;) stride[a] = stride[a + 1] * shape[a + 1];

  const std::size_t run = ranges[d - 1].length();
  std::vector<std::uint8_t> row(run * unit);
  std::vector<std::size_t> pos(d, 0);
  std::size_t taken = 0;
  for (;;) {
    if (dtype == mgrc::DType::f64) {
      for (std::size_t i = 0; i < run; ++i)
        std::memcpy(row.data() + i * 8, &values[taken + i], 8);
    } else {
      for (std::size_t i = 0; i < run; ++i) {
        const float v = static_cast<float>(values[taken + i]);
        std::memcpy(row.data() + i * 4, &v, 4);
      }
    }
    taken += run;
    std::size_t offset = ranges[d - 1].begin;
    for (std::size_t a = 0; a + 1 < d; ++a)
      offset += (ranges[a].begin + pos[a]) * stride[a];
    out.seekp(static_cast<std::streamoff>(offset * unit));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
    if (d == 1) break;
    std::size_t a = d - 1;
    bool done = true;
    while (a-- > 0) {
      if (++pos[a] < ranges[a].length()) {
        done = false;
        break;
      }
      pos[a] = 0;
    }
    if (done) break;
  }
}

// Streaming whole-file stats in fixed-size chunks (deterministic order).
struct FileStats {
  double min = 0.0, max = 0.0, rms = 0.0;
};

FileStats scan_stats(const fs::path& p, std::size_t count, mgrc::DType dtype) {
  std::ifstream in(p, std::ios::binary);
  if (!in) mgrc::raise(mgrc::errc::io_error, "cannot read " + p.string());
  const std::size_t unit = mgrc::dtype_size(dtype);
  const std::size_t chunk = 1 << 20;
  std::vector<std::uint8_t> buf;
  FileStats st;
  double sumsq = 0.0;
  bool first = true;
  std::size_t done = 0;
  while (done < count) {
    const std::size_t n = std::min(chunk, count - done);
    buf.resize(n * unit);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
    if (!in) mgrc::raise(mgrc::errc::io_error, "short read from " + p.string());
    for (std::size_t i = 0; i < n; ++i) {
      double v;
      if (dtype == mgrc::DType::f64) {
        std::memcpy(&v, buf.data() + i * 8, 8);
      } else {
        float f;
        std::memcpy(&f, buf.data() + i * 4, 4);
        v = static_cast<double>(f);
      }
      if (!std::isfinite(v))
        mgrc::raise(mgrc::errc::non_finite_input, "input contains NaN or Inf");
      if (first || v < st.min) st.min = v;
      if (first || v > st.max) st.max = v;
      first = false;
      sumsq += v * v;
    }
    done += n;
  }
  st.rms = std::sqrt(sumsq / static_cast<double>(count));
  return st;
}

std::vector<std::vector<double>> load_coords(
    const fs::path& p, const std::vector<std::size_t>& shape) {
  std::size_t total = 0;
  for (std::size_t s : shape) total += s;
  const auto bytes = read_file(p);
  if (bytes.size() != total * 8)
    mgrc::raise(mgrc::errc::invalid_shape,
                "coordinate file must hold " + std::to_string(total) +
                    " f64 values");
  std::vector<std::vector<double>> coords(shape.size());
  std::size_t at = 0;
  for (std::size_t a = 0; a < shape.size(); ++a) {
    coords[a].resize(shape[a]);
    for (std::size_t i = 0; i < shape[a]; ++i) {
      std::memcpy(&coords[a][i], bytes.data() + at, 8);
      at += 8;
    }
  }
  return coords;
}

// ---- multi-block container file -------------------------------------------

void write_multiblock(const fs::path& p,
                      const std::vector<std::vector<std::uint8_t>>& blocks) {
  std::vector<std::uint8_t> head;
  mgrc::put_u32(head, static_cast<std::uint32_t>(blocks.size()));
  std::uint64_t offset = 4 + 8 * blocks.size();
  for (const auto& b : blocks) {
    mgrc::put_u64(head, offset);
    offset += b.size();
  }
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) mgrc::raise(mgrc::errc::io_error, "cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(head.data()),
            static_cast<std::streamsize>(head.size()));
  for (const auto& b : blocks)
    out.write(reinterpret_cast<const char*>(b.data()),
              static_cast<std::streamsize>(b.size()));
  if (!out) mgrc::raise(mgrc::errc::io_error, "short write to " + p.string());
}

std::vector<std::span<const std::uint8_t>> split_multiblock(
    std::span<const std::uint8_t> file) {
  mgrc::ByteReader r(file);
  const std::uint32_t count = r.u32();
  if (count == 0) mgrc::raise(mgrc::errc::corrupt_stream, "no blocks");
  std::vector<std::uint64_t> offsets(count);
  for (auto& o : offsets) o = r.u64();
  std::vector<std::span<const std::uint8_t>> blocks(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint64_t begin = offsets[i];
    const std::uint64_t end = i + 1 < count ? offsets[i + 1] : file.size();
    if (begin < r.position() || end > file.size() || begin > end)
      mgrc::raise(mgrc::errc::corrupt_stream, "bad block offsets");
    blocks[i] = file.subspan(begin, end - begin);
  }
  return blocks;
}

// Per-axis placement of decompressed blocks, derived from the coordinate
// slices each block container carries.
struct Placement {
  std::vector<std::size_t> shape;              // global
  std::vector<std::vector<mgrc::BlockRange>> block_ranges; // per block
};

Placement derive_placement(const std::vector<mgrc::ContainerInfo>& infos) {
  const std::size_t d = infos[0].shape.size();
  Placement pl;
  pl.shape.assign(d, 0);
  pl.block_ranges.resize(infos.size());

  for (std::size_t a = 0; a < d; ++a) {
    // Distinct ranges along this axis, keyed by start coordinate.
    std::vector<std::pair<double, std::size_t>> ranges; // (start, length)
    for (const auto& info : infos) {
      if (!info.coords_present || info.shape.size() != d)
        mgrc::raise(mgrc::errc::corrupt_stream,
                    "multi-block container lacks placement coordinates");
      const auto start = info.coords[a][0];
      const auto len = static_cast<std::size_t>(info.shape[a]);
      bool found = false;
      for (auto& r : ranges)
        if (r.first == start) {
          if (r.second != len)
            mgrc::raise(mgrc::errc::corrupt_stream, "inconsistent block grid");
          found = true;
        }
      if (!found) ranges.push_back({start, len});
    }
    std::sort(ranges.begin(), ranges.end());
    std::size_t at = 0;
    std::vector<std::pair<double, mgrc::BlockRange>> placed;
    for (const auto& r : ranges) {
      placed.push_back({r.first, {at, at + r.second}});
      at += r.second;
    }
    pl.shape[a] = at;
    for (std::size_t i = 0; i < infos.size(); ++i) {
      const double start = infos[i].coords[a][0];
      for (const auto& pr : placed)
        if (pr.first == start) {
          pl.block_ranges[i].push_back(pr.second);
          break;
        }
    }
    for (const auto& br : pl.block_ranges)
      if (br.size() != a + 1)
        mgrc::raise(mgrc::errc::corrupt_stream, "block placement failed");
  }
  return pl;
}

// ---- subcommands -----------------------------------------------------------

struct CompressArgs {
  std::string input, output;
  std::string shape_text;
  std::string dtype_text = "f64";
  double tol = 1e-3;
  std::string s_text = "inf";
  std::string mode_text = "abs";
  int codec = 2;
  std::uint64_t chunk_mem = 0; // 0 = unlimited
  std::string coords_path;
};

int run_compress(const CompressArgs& args) {
  const auto shape = parse_shape(args.shape_text);
  const auto dtype =
      args.dtype_text == "f32" ? mgrc::DType::f32 : mgrc::DType::f64;
  const mgrc::ErrorSpec spec = parse_spec(args.tol, args.s_text, args.mode_text);
  const auto codec = static_cast<mgrc::Codec>(args.codec);

  std::size_t count = 1;
  for (std::size_t s : shape) count *= s;
  const std::uint64_t expect = count * mgrc::dtype_size(dtype);
  if (file_size(args.input) != expect)
    mgrc::raise(mgrc::errc::invalid_shape,
                "size mismatch: " + args.input + " has " +
                    std::to_string(file_size(args.input)) + " bytes, shape " +
                    args.shape_text + " needs " + std::to_string(expect));

  std::vector<std::vector<double>> user_coords;
  if (!args.coords_path.empty())
    user_coords = load_coords(args.coords_path, shape);

  const std::uint64_t budget =
      args.chunk_mem > 0 ? args.chunk_mem : UINT64_MAX;
  const mgrc::ChunkPlan plan = mgrc::plan_chunks(shape, dtype, budget);
  const std::size_t nblocks = plan.block_count();

  std::vector<std::vector<std::uint8_t>> blocks(nblocks);
  if (nblocks == 1) {
    const auto values = read_block(args.input, shape, dtype, plan.block(0));
    const mgrc::TensorGrid grid = user_coords.empty()
                                      ? mgrc::make_grid(shape)
                                      : mgrc::make_grid(shape, user_coords);
    if (dtype == mgrc::DType::f32) {
      std::vector<float> f(values.size());
      for (std::size_t i = 0; i < values.size(); ++i)
        f[i] = static_cast<float>(values[i]);
      blocks[0] = mgrc::compress(std::span<const float>(f), grid, spec, codec)
                      .bytes;
    } else {
      blocks[0] =
          mgrc::compress(std::span<const double>(values), grid, spec, codec)
              .bytes;
    }
  } else {
    // Blocks are compressed with a shared absolute tolerance so the global
    // bound holds; REL is normalized over the whole file first.
    mgrc::ErrorSpec block_spec = spec;
    block_spec.mode = mgrc::Mode::abs;
    if (spec.mode == mgrc::Mode::rel) {
      const FileStats st = scan_stats(args.input, count, dtype);
      const double norm =
          spec.norm == mgrc::Norm::inf ? st.max - st.min : st.rms;
      if (norm == 0.0)
        mgrc::raise(mgrc::errc::degenerate_data,
                    "relative bound on a constant file");
      block_spec.tol = spec.tol * norm;
    }
    // Every block carries its global coordinate slice so decompression can
    // place it; index coordinates when the user gave none.
    std::vector<std::vector<double>> coords = user_coords;
    if (coords.empty()) {
      coords.resize(shape.size());
      for (std::size_t a = 0; a < shape.size(); ++a) {
        coords[a].resize(shape[a]);
        for (std::size_t i = 0; i < shape[a]; ++i)
          coords[a][i] = static_cast<double>(i);
      }
    }

    std::exception_ptr failure;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) \
    num_threads(mgrc::worker_count())
#endif
    for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(nblocks);
         ++bi) {
      try {
        const auto b = static_cast<std::size_t>(bi);
        const auto ranges = plan.block(b);
        std::vector<std::size_t> bshape(ranges.size());
        std::vector<std::vector<double>> bcoords(ranges.size());
        for (std::size_t a = 0; a < ranges.size(); ++a) {
          bshape[a] = ranges[a].length();
          bcoords[a].assign(coords[a].begin() +
                                static_cast<std::ptrdiff_t>(ranges[a].begin),
                            coords[a].begin() +
                                static_cast<std::ptrdiff_t>(ranges[a].end));
        }
        const auto values = read_block(args.input, shape, dtype, ranges);
        const mgrc::TensorGrid grid = mgrc::make_grid(bshape, bcoords);
        if (dtype == mgrc::DType::f32) {
          std::vector<float> f(values.size());
          for (std::size_t i = 0; i < values.size(); ++i)
            f[i] = static_cast<float>(values[i]);
          blocks[b] =
              mgrc::compress(std::span<const float>(f), grid, block_spec,
                             codec, mgrc::exec::serial)
                  .bytes;
        } else {
          blocks[b] =
              mgrc::compress(std::span<const double>(values), grid, block_spec,
                             codec, mgrc::exec::serial)
                  .bytes;
        }
      } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  }

  write_multiblock(args.output, blocks);
  std::uint64_t out_bytes = file_size(args.output);
  std::fprintf(stderr, "compressed %s (%" PRIu64 " bytes) -> %s (%" PRIu64
                       " bytes), %zu block(s), ratio %.3f\n",
               args.input.c_str(), expect, args.output.c_str(), out_bytes,
               nblocks,
               static_cast<double>(expect) / static_cast<double>(out_bytes));
  return 0;
}

struct DecompressArgs {
  std::string input, output;
};

int run_decompress(const DecompressArgs& args) {
  const auto file = read_file(args.input);
  const auto blocks = split_multiblock(file);

  std::vector<mgrc::ContainerInfo> infos(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i)
    infos[i] = mgrc::inspect(blocks[i]);
  const mgrc::DType dtype = infos[0].dtype;
  for (const auto& info : infos)
    if (info.dtype != dtype)
      mgrc::raise(mgrc::errc::corrupt_stream, "blocks disagree on dtype");

  std::vector<std::size_t> shape;
  std::vector<std::vector<mgrc::BlockRange>> ranges;
  if (blocks.size() == 1) {
    shape.assign(infos[0].shape.begin(), infos[0].shape.end());
    ranges.push_back({});
    for (std::size_t s : shape) ranges[0].push_back({0, s});
  } else {
    Placement pl = derive_placement(infos);
    shape = pl.shape;
    ranges = std::move(pl.block_ranges);
  }

  std::size_t count = 1;
  for (std::size_t s : shape) count *= s;
  {
    // Preallocate the output file.
    std::ofstream touch(args.output, std::ios::binary | std::ios::trunc);
    if (!touch)
      mgrc::raise(mgrc::errc::io_error, "cannot write " + args.output);
  }
  fs::resize_file(args.output, count * mgrc::dtype_size(dtype));
  std::fstream out(args.output,
                   std::ios::binary | std::ios::in | std::ios::out);
  if (!out) mgrc::raise(mgrc::errc::io_error, "cannot write " + args.output);

  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const mgrc::DecompressedArray array = mgrc::decompress(blocks[b]);
    std::vector<double> values;
    if (array.dtype == mgrc::DType::f32) {
      const auto f = array.f32();
      values.assign(f.begin(), f.end());
    } else {
      const auto v = array.f64();
      values.assign(v.begin(), v.end());
    }
    write_block(out, shape, dtype, ranges[b], values);
  }
  out.flush();
  if (!out) mgrc::raise(mgrc::errc::io_error, "short write to " + args.output);
  return 0;
}

struct RefactorArgs {
  std::string input, output;
  std::string shape_text;
  std::string dtype_text = "f64";
  unsigned planes = mgrc::default_planes;
  std::uint64_t chunk_mem = 0;
  std::string coords_path;
};

int run_refactor(const RefactorArgs& args) {
  const auto shape = parse_shape(args.shape_text);
  const auto dtype =
      args.dtype_text == "f32" ? mgrc::DType::f32 : mgrc::DType::f64;

  std::size_t count = 1;
  for (std::size_t s : shape) count *= s;
  const std::uint64_t expect = count * mgrc::dtype_size(dtype);
  if (file_size(args.input) != expect)
    mgrc::raise(mgrc::errc::invalid_shape, "size mismatch for " + args.input);

  std::vector<std::vector<double>> user_coords;
  if (!args.coords_path.empty())
    user_coords = load_coords(args.coords_path, shape);

  const std::uint64_t budget =
      args.chunk_mem > 0 ? args.chunk_mem : UINT64_MAX;
  const mgrc::ChunkPlan plan = mgrc::plan_chunks(shape, dtype, budget);
  const std::size_t nblocks = plan.block_count();

  auto refactor_block = [&](const std::vector<mgrc::BlockRange>& ranges,
                            const fs::path& dir) {
    std::vector<std::size_t> bshape(ranges.size());
    std::vector<std::vector<double>> bcoords;
    for (std::size_t a = 0; a < ranges.size(); ++a)
      bshape[a] = ranges[a].length();
    if (!user_coords.empty()) {
      bcoords.resize(ranges.size());
      for (std::size_t a = 0; a < ranges.size(); ++a)
        bcoords[a].assign(user_coords[a].begin() +
                              static_cast<std::ptrdiff_t>(ranges[a].begin),
                          user_coords[a].begin() +
                              static_cast<std::ptrdiff_t>(ranges[a].end));
    }
    const auto values = read_block(args.input, shape, dtype, ranges);
    const mgrc::TensorGrid grid = bcoords.empty()
                                      ? mgrc::make_grid(bshape)
                                      : mgrc::make_grid(bshape, bcoords);
    mgrc::RefactoredStore store =
        mgrc::refactor(values, grid, args.planes,
                       nblocks == 1 ? mgrc::exec::parallel
                                    : mgrc::exec::serial);
    store.manifest.dtype = dtype;
    mgrc::write_store(store, dir);
  };

  if (nblocks == 1) {
    refactor_block(plan.block(0), args.output);
  } else {
    std::error_code ec;
    fs::create_directories(args.output, ec);
    ordered_json top;
    top["format"] = "mgrc-chunked-store";
    top["version"] = 1;
    top["dtype"] = dtype == mgrc::DType::f32 ? "f32" : "f64";
    top["shape"] = shape;
    ordered_json jblocks = ordered_json::array();
    for (std::size_t b = 0; b < nblocks; ++b) {
      char name[32];
      std::snprintf(name, sizeof name, "block_%05zu", b);
      ordered_json jb;
      jb["dir"] = name;
      ordered_json jranges = ordered_json::array();
      for (const auto& r : plan.block(b))
        jranges.push_back({r.begin, r.end});
      jb["range"] = std::move(jranges);
      jblocks.push_back(std::move(jb));
    }
    top["blocks"] = std::move(jblocks);
    std::ofstream meta(fs::path(args.output) / "chunks.json");
    meta << top.dump(2) << "\n";

    std::exception_ptr failure;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) \
    num_threads(mgrc::worker_count())
#endif
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(nblocks);
         ++b) {
      try {
        char name[32];
        std::snprintf(name, sizeof name, "block_%05zu",
                      static_cast<std::size_t>(b));
        refactor_block(plan.block(static_cast<std::size_t>(b)),
                       fs::path(args.output) / name);
      } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  }
  std::fprintf(stderr, "refactored %s into %s (%zu block(s), %u planes)\n",
               args.input.c_str(), args.output.c_str(), nblocks, args.planes);
  return 0;
}

struct RecomposeArgs {
  std::string store, output;
  double tol = 1e-3;
  std::string s_text = "inf";
  std::string mode_text = "abs";
  std::string state_path;
};

struct ChunkedStore {
  std::vector<std::size_t> shape;
  mgrc::DType dtype = mgrc::DType::f64;
  std::vector<fs::path> dirs;
  std::vector<std::vector<mgrc::BlockRange>> ranges;
};

std::optional<ChunkedStore> load_chunked(const fs::path& dir) {
  const fs::path meta = dir / "chunks.json";
  if (!fs::exists(meta)) return std::nullopt;
  ordered_json j;
  std::ifstream in(meta);
  try {
    in >> j;
    ChunkedStore cs;
    cs.shape = j.at("shape").get<std::vector<std::size_t>>();
    cs.dtype = j.at("dtype") == "f32" ? mgrc::DType::f32 : mgrc::DType::f64;
    for (const auto& jb : j.at("blocks")) {
      cs.dirs.push_back(dir / jb.at("dir").get<std::string>());
      std::vector<mgrc::BlockRange> r;
      for (const auto& jr : jb.at("range"))
        r.push_back({jr.at(0).get<std::size_t>(), jr.at(1).get<std::size_t>()});
      cs.ranges.push_back(std::move(r));
    }
    return cs;
  } catch (const ordered_json::exception& e) {
    mgrc::raise(mgrc::errc::corrupt_stream,
                std::string("chunks.json: ") + e.what());
  }
}

int run_recompose(const RecomposeArgs& args) {
  const fs::path dir(args.store);
  const mgrc::Norm norm =
      args.s_text == "inf" ? mgrc::Norm::inf : mgrc::Norm::s;
  const double smoothness = norm == mgrc::Norm::s ? std::stod(args.s_text) : 0.0;
  const bool rel = args.mode_text == "rel";

  const auto chunked = load_chunked(dir);
  std::vector<fs::path> dirs;
  std::vector<std::vector<mgrc::BlockRange>> ranges;
  std::vector<std::size_t> shape;
  mgrc::DType dtype;
  if (chunked) {
    dirs = chunked->dirs;
    ranges = chunked->ranges;
    shape = chunked->shape;
    dtype = chunked->dtype;
  } else {
    dirs = {dir};
    const mgrc::StoreManifest m = mgrc::read_manifest(dir);
    shape = m.shape;
    dtype = m.dtype;
    ranges.push_back({});
    for (std::size_t s : shape) ranges[0].push_back({0, s});
  }

  std::vector<mgrc::StoreManifest> manifests;
  manifests.reserve(dirs.size());
  for (const auto& d : dirs) manifests.push_back(mgrc::read_manifest(d));

  // Resolve a relative tolerance against whole-field stats.
  double tol_abs = args.tol;
  if (rel) {
    if (norm == mgrc::Norm::inf) {
      double mn = manifests[0].value_min, mx = manifests[0].value_max;
      for (const auto& m : manifests) {
        mn = std::min(mn, m.value_min);
        mx = std::max(mx, m.value_max);
      }
      if (mx == mn)
        mgrc::raise(mgrc::errc::degenerate_data,
                    "relative bound on a constant store");
      tol_abs = args.tol * (mx - mn);
    } else {
      double sumsq = 0.0;
      std::uint64_t n = 0;
      for (const auto& m : manifests) {
        std::uint64_t cnt = 1;
        for (std::size_t s : m.shape) cnt *= s;
        sumsq += m.value_rms * m.value_rms * static_cast<double>(cnt);
        n += cnt;
      }
      const double rms = std::sqrt(sumsq / static_cast<double>(n));
      if (rms == 0.0)
        mgrc::raise(mgrc::errc::degenerate_data,
                    "relative bound on a zero store");
      tol_abs = args.tol * rms;
    }
  }

  // Load prior states, if any.
  std::vector<mgrc::RetrievalState> states;
  states.reserve(dirs.size());
  ordered_json saved;
  bool have_saved = false;
  if (!args.state_path.empty() && fs::exists(args.state_path)) {
    std::ifstream in(args.state_path);
    in >> saved;
    have_saved = true;
  }
  for (std::size_t b = 0; b < dirs.size(); ++b) {
    const auto source = mgrc::directory_source(dirs[b], manifests[b]);
    if (have_saved) {
      const auto& jb = dirs.size() == 1 ? saved : saved.at("blocks").at(b);
      states.push_back(
          mgrc::state_from_json(manifests[b], source, jb.dump()));
    } else {
      states.push_back(mgrc::make_initial_state(manifests[b]));
    }
  }

  std::size_t count = 1;
  for (std::size_t s : shape) count *= s;
  {
    std::ofstream touch(args.output, std::ios::binary | std::ios::trunc);
    if (!touch)
      mgrc::raise(mgrc::errc::io_error, "cannot write " + args.output);
  }
  fs::resize_file(args.output, count * mgrc::dtype_size(dtype));
  std::fstream out(args.output,
                   std::ios::binary | std::ios::in | std::ios::out);

  std::uint64_t fetched_bytes = 0;
  bool all_satisfiable = true;
  double worst = 0.0;
  for (std::size_t b = 0; b < dirs.size(); ++b) {
    const auto source = mgrc::directory_source(dirs[b], manifests[b]);
    const mgrc::SegmentRequest req =
        mgrc::request(manifests[b], tol_abs, norm, smoothness, states[b]);
    fetched_bytes += req.total_bytes;
    all_satisfiable = all_satisfiable && req.satisfiable;
    const std::vector<double> values =
        mgrc::reconstruct(manifests[b], source, req, states[b]);
    worst = std::max(worst, states[b].accrued.value);
    write_block(out, shape, dtype, ranges[b], values);
  }
  out.flush();
  if (!out) mgrc::raise(mgrc::errc::io_error, "short write to " + args.output);

  if (!args.state_path.empty()) {
    ordered_json jstate;
    if (dirs.size() == 1) {
      jstate = ordered_json::parse(mgrc::state_to_json(states[0]));
    } else {
      jstate["format"] = "mgrc-chunked-state";
      jstate["version"] = 1;
      ordered_json jb = ordered_json::array();
      for (const auto& st : states)
        jb.push_back(ordered_json::parse(mgrc::state_to_json(st)));
      jstate["blocks"] = std::move(jb);
    }
    std::ofstream sf(args.state_path, std::ios::trunc);
    sf << jstate.dump(2) << "\n";
  }

  if (!all_satisfiable)
    std::fprintf(stderr,
                 "warning: UnsatisfiableTolerance: full retrieval cannot "
                 "reach %.17g; wrote the best effort\n",
                 tol_abs);
  std::fprintf(stderr,
               "recomposed %s -> %s, fetched %" PRIu64
               " segment bytes, estimator %.6g (tolerance %.6g)\n",
               args.store.c_str(), args.output.c_str(), fetched_bytes, worst,
               tol_abs);
  return 0;
}

int run_inspect(const std::string& target) {
  const fs::path p(target);
  if (fs::is_directory(p)) {
    if (const auto chunked = load_chunked(p)) {
      std::printf("format: mgrc-chunked-store\n");
      std::printf("blocks: %zu\n", chunked->dirs.size());
      for (std::size_t b = 0; b < chunked->dirs.size(); ++b) {
        std::printf("--- block %zu ---\n", b);
        const auto m = mgrc::read_manifest(chunked->dirs[b]);
        std::fputs(mgrc::manifest_to_json(m).c_str(), stdout);
      }
      return 0;
    }
    const auto m = mgrc::read_manifest(p);
    std::fputs(mgrc::manifest_to_json(m).c_str(), stdout);
    return 0;
  }
  const auto file = read_file(p);
  const auto blocks = split_multiblock(file);
  std::printf("format: mgrc-multiblock\n");
  std::printf("blocks: %zu\n", blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    std::printf("--- block %zu ---\n", i);
    std::fputs(mgrc::describe(mgrc::inspect(blocks[i])).c_str(), stdout);
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"error-bounded compression and progressive refactoring of "
               "raw floating-point arrays"};
  app.require_subcommand(1);

  CompressArgs cargs;
  auto* c = app.add_subcommand("compress", "compress a raw array file");
  c->add_option("--input", cargs.input, "raw input file")->required();
  c->add_option("--output", cargs.output, "compressed output file")->required();
  c->add_option("--shape", cargs.shape_text, "array shape, e.g. 129x129")
      ->required();
  c->add_option("--dtype", cargs.dtype_text, "element type")
      ->check(CLI::IsMember({"f32", "f64"}));
  c->add_option("--tol", cargs.tol, "error tolerance")->required();
  c->add_option("--s", cargs.s_text, "norm: inf or a smoothness value");
  c->add_option("--mode", cargs.mode_text, "bound mode")
      ->check(CLI::IsMember({"abs", "rel"}));
  c->add_option("--codec", cargs.codec, "lossless codec 0..2")
      ->check(CLI::Range(0, 2));
  c->add_option("--chunk-mem", cargs.chunk_mem,
                "per-block memory budget, e.g. 2MiB")
      ->transform(CLI::AsSizeValue(false));
  c->add_option("--coords", cargs.coords_path,
                "per-axis f64 coordinate file (concatenated axes)");

  DecompressArgs dargs;
  auto* dch = app.add_subcommand("decompress", "decompress to a raw file");
  dch->add_option("--input", dargs.input, "compressed file")->required();
  dch->add_option("--output", dargs.output, "raw output file")->required();

  RefactorArgs rargs;
  auto* rf = app.add_subcommand("refactor",
                                "refactor into precision segments");
  rf->add_option("--input", rargs.input, "raw input file")->required();
  rf->add_option("--output", rargs.output, "store directory")->required();
  rf->add_option("--shape", rargs.shape_text, "array shape")->required();
  rf->add_option("--dtype", rargs.dtype_text, "element type")
      ->check(CLI::IsMember({"f32", "f64"}));
  rf->add_option("--planes", rargs.planes, "bitplane count (8..60)")
      ->check(CLI::Range(8u, 60u));
  rf->add_option("--chunk-mem", rargs.chunk_mem, "per-block memory budget")
      ->transform(CLI::AsSizeValue(false));
  rf->add_option("--coords", rargs.coords_path, "per-axis f64 coordinates");

  RecomposeArgs rcargs;
  auto* rc = app.add_subcommand("recompose",
                                "reconstruct from a store to a tolerance");
  rc->add_option("--store", rcargs.store, "store directory")->required();
  rc->add_option("--output", rcargs.output, "raw output file")->required();
  rc->add_option("--tol", rcargs.tol, "error tolerance")->required();
  rc->add_option("--s", rcargs.s_text, "norm: inf or a smoothness value");
  rc->add_option("--mode", rcargs.mode_text, "bound mode")
      ->check(CLI::IsMember({"abs", "rel"}));
  rc->add_option("--state", rcargs.state_path,
                 "retrieval state file for incremental sessions");

  std::string inspect_target;
  auto* in = app.add_subcommand("inspect", "describe a compressed file or store");
  in->add_option("path", inspect_target, "file or store directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c) return run_compress(cargs);
    if (*dch) return run_decompress(dargs);
    if (*rf) return run_refactor(rargs);
    if (*rc) return run_recompose(rcargs);
    if (*in) return run_inspect(inspect_target);
  } catch (const mgrc::error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
