#include "mgrc/refactor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mgrc/bytes.hpp"
#include "mgrc/codec.hpp"
#include "mgrc/error.hpp"
#include "mgrc/transform.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mgrc {

TensorGrid StoreManifest::grid() const {
  return coords.empty() ? make_grid(shape) : make_grid(shape, coords);
}

namespace bitplane {

int level_exponent(double max_abs) {
  if (max_abs == 0.0) return empty_level_exponent;
  int e = 0;
  const double m = std::frexp(max_abs, &e); // max = m * 2^e, m in [0.5, 1)
  return m == 0.5 ? e - 1 : e;
}

std::uint64_t magnitude(double c, int exponent, std::uint32_t planes) {
  const double scaled = std::scalbn(std::fabs(c),
                                    static_cast<int>(planes) - exponent);
  const double truncated = std::floor(scaled);
  const double cap = std::ldexp(1.0, static_cast<int>(planes));
  if (truncated >= cap) return (std::uint64_t{1} << planes) - 1;
  return static_cast<std::uint64_t>(truncated);
}

std::vector<std::uint8_t> pack_plane(std::span<const std::uint64_t> mags,
                                     std::span<const std::uint8_t> signs,
                                     std::uint32_t plane, std::uint32_t planes,
                                     std::uint64_t& bit_count) {
  const std::uint32_t bit = planes - 1 - plane;
  std::vector<std::uint8_t> out;
  std::uint8_t acc = 0;
  int nbits = 0;
  auto push_bit = [&](std::uint32_t b) {
    acc = static_cast<std::uint8_t>((acc << 1) | (b & 1u));
    if (++nbits == 8) {
      out.push_back(acc);
      acc = 0;
      nbits = 0;
    }
  };
  for (std::size_t i = 0; i < mags.size(); ++i) {
    if (plane == 0) push_bit(signs[i]);
    push_bit(static_cast<std::uint32_t>(mags[i] >> bit));
  }
  if (nbits > 0) out.push_back(static_cast<std::uint8_t>(acc << (8 - nbits)));
  bit_count = mags.size() * (plane == 0 ? 2 : 1);
  return out;
}

} // namespace bitplane

namespace {

std::string segment_file_name(std::uint32_t level, std::uint32_t plane) {
  return "l" + std::to_string(level) + "_b" + std::to_string(plane) + ".bin";
}

// Splits the coefficient array into per-level buckets in node scan order
// (row-major over the full grid).
std::vector<std::vector<double>> bucket_by_level(
    const MultilevelCoefficients& c, const GridHierarchy& h) {
  const std::size_t d = h.ndims();
  std::vector<std::vector<double>> buckets(h.nlevels + 1);
  for (std::size_t l = 0; l <= h.nlevels; ++l)
    buckets[l].reserve(h.level_node_counts[l]);
  std::vector<std::size_t> idx(d, 0);
  std::size_t flat = 0;
  for (;;) {
    buckets[h.level_tag(idx.data())].push_back(c.values[flat]);
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
  return buckets;
}

struct BitCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0; // bit position

  std::uint32_t next() {
    const std::size_t byte = pos / 8;
    if (byte >= bytes.size())
      raise(errc::corrupt_stream, "segment bit stream truncated");
    const std::uint32_t b = (bytes[byte] >> (7 - pos % 8)) & 1u;
    ++pos;
    return b;
  }
};

ErrorEstimate estimator_for(const StoreManifest& m, const GridHierarchy& h,
                            std::span<const std::uint32_t> fetched, Norm norm,
                            double smoothness) {
  ErrorSpec spec;
  spec.tol = 1.0; // unused by the estimator
  spec.norm = norm;
  spec.smoothness = smoothness;
  return segment_estimator(fetched, m.level_exponents, m.planes, spec, h);
}

} // namespace

RefactoredStore refactor(std::span<const double> u, const TensorGrid& grid,
                         std::uint32_t planes, exec policy) {
  if (planes < min_planes || planes > max_planes)
    raise(errc::plane_count_out_of_range,
          std::to_string(planes) + " planes, supported range is " +
              std::to_string(min_planes) + ".." + std::to_string(max_planes));
  if (u.size() != grid.element_count())
    raise(errc::shape_mismatch, "array does not match the grid");
  if (kernels::any_non_finite(u, policy))
    raise(errc::non_finite_input, "input contains NaN or Inf");

  const GridHierarchy h = build_hierarchy(grid);
  const MultilevelCoefficients coeffs = forward_transform(u, h, policy);
  const auto buckets = bucket_by_level(coeffs, h);

  RefactoredStore store;
  StoreManifest& m = store.manifest;
  m.dtype = DType::f64;
  m.shape = grid.shape;
  if (grid.explicit_coords) m.coords = grid.coords;
  m.nlevels = h.nlevels;
  m.planes = planes;
  m.level_counts = h.level_node_counts;
  const auto mm = kernels::minmax(u, policy);
  m.value_min = mm.min;
  m.value_max = mm.max;
  m.value_rms = std::sqrt(kernels::sum_squares(u, policy) /
                          static_cast<double>(u.size()));

  const std::size_t L = h.nlevels;
  m.level_exponents.resize(L + 1);
  std::vector<std::vector<std::uint64_t>> mags(L + 1);
  std::vector<std::vector<std::uint8_t>> signs(L + 1);
  for (std::size_t l = 0; l <= L; ++l) {
    const auto& vals = buckets[l];
    double max_abs = 0.0;
    for (double v : vals) {
      const double a = std::fabs(v);
      if (a > max_abs) max_abs = a;
    }
    m.level_exponents[l] = bitplane::level_exponent(max_abs);
    if (m.level_exponents[l] == empty_level_exponent) continue;
    mags[l].resize(vals.size());
    signs[l].resize(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) {
      mags[l][i] = bitplane::magnitude(vals[i], m.level_exponents[l], planes);
      signs[l][i] = vals[i] < 0.0 ? 1 : 0;
    }
  }

  m.segments.assign(L + 1, std::vector<SegmentMeta>(planes));
  store.segments.assign(L + 1, {});
  for (std::size_t l = 0; l <= L; ++l)
    store.segments[l].resize(planes);

  // Segments are independent; encode them in parallel.
  const std::size_t total = (L + 1) * planes;
  auto encode_one = [&](std::size_t k) {
    const std::uint32_t l = static_cast<std::uint32_t>(k / planes);
    const std::uint32_t p = static_cast<std::uint32_t>(k % planes);
    SegmentMeta& meta = m.segments[l][p];
    meta.file_name = segment_file_name(l, p);
    if (m.level_exponents[l] == empty_level_exponent) return;
    std::uint64_t bits = 0;
    const auto raw = bitplane::pack_plane(mags[l], signs[l], p, planes, bits);
    store.segments[l][p] = huffman_pack_bytes(raw);
    meta.raw_bits = bits;
    meta.byte_size = store.segments[l][p].size();
    meta.checksum = crc32(store.segments[l][p]);
  };
  if (policy == exec::parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(worker_count())
#endif
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(total); ++k)
      encode_one(static_cast<std::size_t>(k));
  } else {
    for (std::size_t k = 0; k < total; ++k) encode_one(k);
  }
  return store;
}

RetrievalState make_initial_state(const StoreManifest& manifest) {
  RetrievalState st;
  const std::size_t nl = manifest.nlevels + 1;
  st.planes_fetched.assign(nl, 0);
  st.magnitudes.resize(nl);
  st.signs.resize(nl);
  for (std::size_t l = 0; l < nl; ++l) {
    st.magnitudes[l].assign(manifest.level_counts[l], 0);
    st.signs[l].assign(manifest.level_counts[l], 0);
  }
  const GridHierarchy h = build_hierarchy(manifest.grid());
  st.accrued = estimator_for(manifest, h, st.planes_fetched, Norm::inf, 0.0);
  return st;
}

SegmentRequest request(const StoreManifest& manifest, double tol_abs,
                       Norm norm, double smoothness,
                       const RetrievalState& state) {
  if (!(tol_abs > 0.0)) raise(errc::invalid_state, "tolerance must be > 0");
  if (state.planes_fetched.size() != manifest.nlevels + 1)
    raise(errc::invalid_state, "state does not match the manifest");
  for (std::uint32_t b : state.planes_fetched)
    if (b > manifest.planes)
      raise(errc::invalid_state, "state claims more planes than the store");

  const GridHierarchy h = build_hierarchy(manifest.grid());
  std::vector<std::uint32_t> fetched(state.planes_fetched.begin(),
                                     state.planes_fetched.end());

  SegmentRequest req;
  double current =
      estimator_for(manifest, h, fetched, norm, smoothness).value;
  while (current > tol_abs) {
    // Candidate per level: its next plane. Pick the best estimator decrease
    // per byte; ties go to the lower level (then lower plane, implied).
    int best_level = -1;
    double best_ratio = -1.0;
    double best_after = 0.0;
    for (std::size_t l = 0; l <= manifest.nlevels; ++l) {
      if (fetched[l] >= manifest.planes) continue;
      if (manifest.level_exponents[l] == empty_level_exponent) continue;
      ++fetched[l];
      const double after =
          estimator_for(manifest, h, fetched, norm, smoothness).value;
      --fetched[l];
      const double decrease = current - after;
      if (decrease <= 0.0) continue;
      const std::uint64_t size = manifest.segments[l][fetched[l]].byte_size;
      const double ratio =
          decrease / static_cast<double>(size > 0 ? size : 1);
      if (ratio > best_ratio) {
        best_ratio = ratio;
        best_level = static_cast<int>(l);
        best_after = after;
      }
    }
    if (best_level < 0) break; // store exhausted
    const auto l = static_cast<std::uint32_t>(best_level);
    req.segments.push_back({l, fetched[l]});
    req.total_bytes += manifest.segments[l][fetched[l]].byte_size;
    ++fetched[l];
    current = best_after;
  }

  req.predicted = estimator_for(manifest, h, fetched, norm, smoothness);
  req.satisfiable = req.predicted.value <= tol_abs;
  return req;
}

std::vector<double> reconstruct(const StoreManifest& manifest,
                                const SegmentSource& source,
                                const SegmentRequest& req,
                                RetrievalState& state, exec policy) {
  const GridHierarchy h = build_hierarchy(manifest.grid());
  if (state.planes_fetched.size() != manifest.nlevels + 1)
    raise(errc::invalid_state, "state does not match the manifest");

  for (const SegmentId& id : req.segments) {
    if (id.level > manifest.nlevels || id.plane >= manifest.planes)
      raise(errc::invalid_state, "segment id out of range");
    if (id.plane != state.planes_fetched[id.level])
      raise(errc::prefix_violation,
            "level " + std::to_string(id.level) + " expects plane " +
                std::to_string(state.planes_fetched[id.level]) + ", got " +
                std::to_string(id.plane));
    const SegmentMeta& meta = manifest.segments[id.level][id.plane];
    if (manifest.level_exponents[id.level] == empty_level_exponent) {
      ++state.planes_fetched[id.level];
      continue;
    }
    const std::vector<std::uint8_t> payload = source(id.level, id.plane);
    if (payload.size() != meta.byte_size ||
        crc32(payload) != meta.checksum)
      raise(errc::checksum_mismatch,
            "segment " + meta.file_name + " does not match the manifest");
    const std::uint64_t expect_bits =
        manifest.level_counts[id.level] * (id.plane == 0 ? 2 : 1);
    if (meta.raw_bits != expect_bits)
      raise(errc::corrupt_stream, "segment bit count mismatch");
    const auto raw = huffman_unpack_bytes(
        payload, static_cast<std::size_t>((expect_bits + 7) / 8));

    BitCursor cur{raw};
    auto& mags = state.magnitudes[id.level];
    auto& signs = state.signs[id.level];
    const std::uint32_t bit = manifest.planes - 1 - id.plane;
    for (std::size_t i = 0; i < mags.size(); ++i) {
      if (id.plane == 0) signs[i] = static_cast<std::uint8_t>(cur.next());
      mags[i] |= static_cast<std::uint64_t>(cur.next()) << bit;
    }
    ++state.planes_fetched[id.level];
  }

  state.accrued = estimator_for(manifest, h, state.planes_fetched,
                                req.predicted.norm, req.predicted.smoothness);

  // Scatter the fixed-point values back into coefficient layout and invert.
  MultilevelCoefficients coeffs;
  coeffs.hierarchy = &h;
  coeffs.values.assign(h.grid.element_count(), 0.0);
  const std::size_t d = h.ndims();
  std::vector<std::size_t> cursor(manifest.nlevels + 1, 0);
  std::vector<std::size_t> idx(d, 0);
  std::size_t flat = 0;
  for (;;) {
    const std::uint8_t tag = h.level_tag(idx.data());
    const std::size_t i = cursor[tag]++;
    if (manifest.level_exponents[tag] != empty_level_exponent) {
      const double mag =
          std::ldexp(static_cast<double>(state.magnitudes[tag][i]),
                     manifest.level_exponents[tag] -
                         static_cast<int>(manifest.planes));
      coeffs.values[flat] = state.signs[tag][i] ? -mag : mag;
    }
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
  return inverse_transform(coeffs, policy);
}

// ---- persistence ----------------------------------------------------------

namespace {

using json = nlohmann::ordered_json;

json manifest_json(const StoreManifest& m) {
  json j;
  j["format"] = "mgrc-store";
  j["version"] = 1;
  j["dtype"] = m.dtype == DType::f32 ? "f32" : "f64";
  j["shape"] = m.shape;
  if (m.coords.empty()) j["coords"] = nullptr;
  else j["coords"] = m.coords;
  j["nlevels"] = m.nlevels;
  j["planes"] = m.planes;
  j["stats"] = {{"min", m.value_min}, {"max", m.value_max},
                {"rms", m.value_rms}};
  json exps = json::array();
  for (int e : m.level_exponents) {
    if (e == empty_level_exponent) exps.push_back(nullptr);
    else exps.push_back(e);
  }
  j["level_exponents"] = std::move(exps);
  j["level_counts"] = m.level_counts;
  json segs = json::array();
  for (std::size_t l = 0; l < m.segments.size(); ++l)
    for (std::size_t p = 0; p < m.segments[l].size(); ++p) {
      const SegmentMeta& s = m.segments[l][p];
      segs.push_back({{"level", l},
                      {"plane", p},
                      {"bytes", s.byte_size},
                      {"bits", s.raw_bits},
                      {"crc32", s.checksum},
                      {"file", s.file_name}});
    }
  j["segments"] = std::move(segs);
  return j;
}

} // namespace

std::string manifest_to_json(const StoreManifest& m) {
  return manifest_json(m).dump(2) + "\n";
}

StoreManifest manifest_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    raise(errc::corrupt_stream, std::string("manifest: ") + e.what());
  }
  StoreManifest m;
  try {
    if (j.at("format") != "mgrc-store")
      raise(errc::bad_magic, "not an mgrc store manifest");
    if (j.at("version") != 1)
      raise(errc::unsupported_version, "store manifest version");
    m.dtype = j.at("dtype") == "f32" ? DType::f32 : DType::f64;
    m.shape = j.at("shape").get<std::vector<std::size_t>>();
    if (!j.at("coords").is_null())
      m.coords = j.at("coords").get<std::vector<std::vector<double>>>();
    m.nlevels = j.at("nlevels").get<std::size_t>();
    m.planes = j.at("planes").get<std::uint32_t>();
    m.value_min = j.at("stats").at("min").get<double>();
    m.value_max = j.at("stats").at("max").get<double>();
    m.value_rms = j.at("stats").at("rms").get<double>();
    for (const auto& e : j.at("level_exponents"))
      m.level_exponents.push_back(e.is_null() ? empty_level_exponent
                                              : e.get<int>());
    m.level_counts = j.at("level_counts").get<std::vector<std::uint64_t>>();
    if (m.level_exponents.size() != m.nlevels + 1 ||
        m.level_counts.size() != m.nlevels + 1)
      raise(errc::corrupt_stream, "manifest level arrays are inconsistent");
    m.segments.assign(m.nlevels + 1, std::vector<SegmentMeta>(m.planes));
    for (const auto& s : j.at("segments")) {
      const auto l = s.at("level").get<std::size_t>();
      const auto p = s.at("plane").get<std::size_t>();
      if (l > m.nlevels || p >= m.planes)
        raise(errc::corrupt_stream, "segment id out of range");
      SegmentMeta& meta = m.segments[l][p];
      meta.byte_size = s.at("bytes").get<std::uint64_t>();
      meta.raw_bits = s.at("bits").get<std::uint64_t>();
      meta.checksum = s.at("crc32").get<std::uint32_t>();
      meta.file_name = s.at("file").get<std::string>();
    }
  } catch (const json::exception& e) {
    raise(errc::corrupt_stream, std::string("manifest: ") + e.what());
  }
  return m;
}

void write_store(const RefactoredStore& store,
                 const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) raise(errc::io_error, "cannot create " + dir.string());
  {
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) raise(errc::io_error, "cannot write manifest.json");
    out << manifest_to_json(store.manifest);
  }
  const StoreManifest& m = store.manifest;
  for (std::size_t l = 0; l < m.segments.size(); ++l)
    for (std::size_t p = 0; p < m.segments[l].size(); ++p) {
      const SegmentMeta& meta = m.segments[l][p];
      std::vector<std::uint8_t> file;
      put_u32(file, meta.checksum);
      put_u64(file, meta.raw_bits);
      const auto& payload = store.segments[l][p];
      file.insert(file.end(), payload.begin(), payload.end());
      std::ofstream out(dir / meta.file_name, std::ios::binary);
      if (!out) raise(errc::io_error, "cannot write " + meta.file_name);
      out.write(reinterpret_cast<const char*>(file.data()),
                static_cast<std::streamsize>(file.size()));
    }
}

StoreManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json", std::ios::binary);
  if (!in) raise(errc::io_error, "cannot read " + (dir / "manifest.json").string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return manifest_from_json(text);
}

SegmentSource directory_source(const std::filesystem::path& dir,
                               const StoreManifest& manifest) {
  return [dir, &manifest](std::uint32_t level,
                          std::uint32_t plane) -> std::vector<std::uint8_t> {
    const SegmentMeta& meta = manifest.segments[level][plane];
    std::ifstream in(dir / meta.file_name, std::ios::binary);
    if (!in) raise(errc::io_error, "cannot read " + meta.file_name);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    ByteReader r(bytes);
    const std::uint32_t crc = r.u32();
    const std::uint64_t bits = r.u64();
    std::vector<std::uint8_t> payload(bytes.begin() + 12, bytes.end());
    if (bits != meta.raw_bits || crc != crc32(payload))
      raise(errc::checksum_mismatch, meta.file_name + " failed its checksum");
    return payload;
  };
}

std::string state_to_json(const RetrievalState& state) {
  json j;
  j["format"] = "mgrc-state";
  j["version"] = 1;
  j["planes_fetched"] = state.planes_fetched;
  j["accrued"] = {{"norm", state.accrued.norm == Norm::inf ? "inf" : "s"},
                  {"s", state.accrued.smoothness},
                  {"value", state.accrued.value},
                  {"certified", state.accrued.certified}};
  return j.dump(2) + "\n";
}

RetrievalState state_from_json(const StoreManifest& manifest,
                               const SegmentSource& source,
                               const std::string& text) {
  json j;
  try {
    j = json::parse(text);
    if (j.at("format") != "mgrc-state" || j.at("version") != 1)
      raise(errc::invalid_state, "not an mgrc retrieval state");
  } catch (const json::exception& e) {
    raise(errc::invalid_state, std::string("state: ") + e.what());
  }
  std::vector<std::uint32_t> fetched;
  try {
    fetched = j.at("planes_fetched").get<std::vector<std::uint32_t>>();
  } catch (const json::exception& e) {
    raise(errc::invalid_state, std::string("state: ") + e.what());
  }
  if (fetched.size() != manifest.nlevels + 1)
    raise(errc::invalid_state, "state does not match the manifest");

  // Replay the recorded planes to rebuild the accumulators.
  RetrievalState st = make_initial_state(manifest);
  SegmentRequest replay;
  for (std::uint32_t l = 0; l <= manifest.nlevels; ++l)
    for (std::uint32_t p = 0; p < fetched[l]; ++p)
      replay.segments.push_back({l, p});
  replay.predicted = st.accrued;
  if (!replay.segments.empty())
    reconstruct(manifest, source, replay, st, exec::parallel);
  return st;
}

} // namespace mgrc
