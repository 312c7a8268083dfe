#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "annforge/core.hpp"
#include "annforge/index.hpp"

namespace annforge::io {

// Index container layout, all integers little-endian:
//   "FANN" magic, u32 version, u32 dim, u32 m, u32 nlist, u64 count,
//   u32 flags (bit 0: rotation present), then f32 rotation[dim*dim] when
//   flagged, f32 coarse[nlist*dim], f32 codebooks[m*256*dsub],
//   u64 cell_offsets[nlist+1], u64 ids[count], u8 codes[count*m],
//   and a trailing u32 CRC-32 over every preceding byte.
inline constexpr char kIndexMagic[4] = {'F', 'A', 'N', 'N'};
inline constexpr std::uint32_t kIndexVersion = 1;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(std::uint8_t(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(std::uint8_t(v >> (8 * i)));
}

inline void put_f32s(std::vector<std::uint8_t>& buf, const float* v,
                     std::size_t n) {
  static_assert(sizeof(float) == 4);
  const std::size_t at = buf.size();
  buf.resize(at + n * 4);
  std::memcpy(buf.data() + at, v, n * 4);  // little-endian host
}

struct Cursor {
  const std::uint8_t* p;
  std::size_t size;
  std::size_t at = 0;

  void need(std::size_t n, const char* what) const {
    if (at + n > size)
      throw FormatError(std::string("index file truncated reading ") + what +
                        " at byte " + std::to_string(at));
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[at + i]) << (8 * i);
    at += 4;
    return v;
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[at + i]) << (8 * i);
    at += 8;
    return v;
  }

  void f32s(float* out, std::size_t n, const char* what) {
    need(n * 4, what);
    std::memcpy(out, p + at, n * 4);
    at += n * 4;
  }

  void bytes(std::uint8_t* out, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(out, p + at, n);
    at += n;
  }
};

inline std::uint32_t crc32_of(const std::uint8_t* p, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt chunks; files here stay far below 4 GB but chunk anyway.
  while (n > 0) {
    const std::size_t chunk = std::min<std::size_t>(n, 1u << 30);
    crc = crc32(crc, p, uInt(chunk));
    p += chunk;
    n -= chunk;
  }
  return std::uint32_t(crc);
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const std::streamoff size = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> buf;
  buf.resize(std::size_t(size));
  if (size > 0 && !in.read(reinterpret_cast<char*>(buf.data()), size))
    throw IoError("cannot read " + path.string());
  return buf;
}

inline void write_file(const std::filesystem::path& path,
                       const std::uint8_t* p, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  if (!out.write(reinterpret_cast<const char*>(p), std::streamsize(n)))
    throw IoError("cannot write " + path.string());
}

// Shared record walk for the .fvecs / .bvecs / .ivecs family: each record is
// a 4-byte little-endian element count followed by that many payload elements.
template <typename OnRecord>
inline std::size_t read_vec_records(const std::filesystem::path& path,
                                    std::size_t elem_bytes,
                                    std::uint32_t& dim_out,
                                    OnRecord&& on_record) {
  std::vector<std::uint8_t> buf = read_file(path);
  if (buf.empty()) throw FormatError("empty file: " + path.string());

  std::uint32_t dim = 0;
  std::size_t at = 0, records = 0;
  while (at < buf.size()) {
    if (at + 4 > buf.size())
      throw FormatError("truncated record header at byte " +
                        std::to_string(at) + " in " + path.string());
    std::int32_t d = 0;
    std::memcpy(&d, buf.data() + at, 4);
    if (d <= 0)
      throw FormatError("non-positive dimension at byte " + std::to_string(at) +
                        " in " + path.string());
    if (records == 0) {
      dim = std::uint32_t(d);
    } else if (std::uint32_t(d) != dim) {
      throw FormatError("dimension mismatch at byte " + std::to_string(at) +
                        " in " + path.string() + ": record " +
                        std::to_string(records) + " has " + std::to_string(d) +
                        ", expected " + std::to_string(dim));
    }
    at += 4;
    const std::size_t payload = std::size_t(d) * elem_bytes;
    if (at + payload > buf.size())
      throw FormatError("truncated record payload at byte " +
                        std::to_string(at) + " in " + path.string());
    on_record(buf.data() + at, std::uint32_t(d));
    at += payload;
    records += 1;
  }
  dim_out = dim;
  return records;
}

}  // namespace detail

/// TEXMEX .fvecs: float32 vectors; ids are assigned 0..count-1.
inline VectorSet read_fvecs(const std::filesystem::path& path) {
  VectorSet vs;
  std::uint32_t dim = 0;
  const std::size_t records = detail::read_vec_records(
      path, 4, dim, [&](const std::uint8_t* p, std::uint32_t d) {
        const std::size_t at = vs.data.size();
        vs.data.resize(at + d);
        std::memcpy(vs.data.data() + at, p, std::size_t(d) * 4);
      });
  vs.dim = dim;
  vs.ids.resize(records);
  for (std::size_t i = 0; i < records; ++i) vs.ids[i] = i;
  return vs;
}

/// TEXMEX .bvecs: uint8 vectors widened to float.
inline VectorSet read_bvecs(const std::filesystem::path& path) {
  VectorSet vs;
  std::uint32_t dim = 0;
  const std::size_t records = detail::read_vec_records(
      path, 1, dim, [&](const std::uint8_t* p, std::uint32_t d) {
        const std::size_t at = vs.data.size();
        vs.data.resize(at + d);
        for (std::uint32_t t = 0; t < d; ++t) vs.data[at + t] = float(p[t]);
      });
  vs.dim = dim;
  vs.ids.resize(records);
  for (std::size_t i = 0; i < records; ++i) vs.ids[i] = i;
  return vs;
}

/// TEXMEX .ivecs ground truth: int32 neighbor ids, one row per query.
/// Rows must agree on length and hold distinct ids.
inline GroundTruth read_ivecs(const std::filesystem::path& path) {
  GroundTruth gt;
  std::uint32_t k = 0;
  std::vector<std::int32_t> row;
  const std::size_t records = detail::read_vec_records(
      path, 4, k, [&](const std::uint8_t* p, std::uint32_t d) {
        row.resize(d);
        std::memcpy(row.data(), p, std::size_t(d) * 4);
        std::vector<std::int32_t> sorted = row;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
          throw FormatError("duplicate ids within a row in " + path.string());
        gt.ids.insert(gt.ids.end(), row.begin(), row.end());
      });
  gt.k_gt = k;
  gt.count = records;
  return gt;
}

inline void save_index(const index::IVFIndex& ix,
                       const std::filesystem::path& path) {
  ix.validate();
  const auto& p = ix.params;
  std::vector<std::uint8_t> buf;
  buf.reserve(64 + ix.codes.size() + ix.ids.size() * 8 +
              ix.coarse.values.size() * 4);

  buf.insert(buf.end(), kIndexMagic, kIndexMagic + 4);
  detail::put_u32(buf, kIndexVersion);
  detail::put_u32(buf, p.dim);
  detail::put_u32(buf, p.m);
  detail::put_u32(buf, p.nlist);
  detail::put_u64(buf, ix.count());
  detail::put_u32(buf, ix.rotation ? 1u : 0u);
  if (ix.rotation)
    detail::put_f32s(buf, ix.rotation->values.data(),
                     ix.rotation->values.size());
  detail::put_f32s(buf, ix.coarse.values.data(), ix.coarse.values.size());
  detail::put_f32s(buf, ix.codebook.centroids.data(),
                   ix.codebook.centroids.size());
  for (auto v : ix.cell_offsets) detail::put_u64(buf, v);
  for (auto v : ix.ids) detail::put_u64(buf, v);
  buf.insert(buf.end(), ix.codes.begin(), ix.codes.end());

  detail::put_u32(buf, detail::crc32_of(buf.data(), buf.size()));
  detail::write_file(path, buf.data(), buf.size());
}

inline index::IVFIndex load_index(const std::filesystem::path& path) {
  std::vector<std::uint8_t> buf = detail::read_file(path);
  if (buf.size() < 8 + 4)
    throw FormatError("index file too small: " + path.string());
  if (std::memcmp(buf.data(), kIndexMagic, 4) != 0)
    throw FormatError("bad magic in " + path.string());

  const std::uint32_t stored_crc = [&] {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= std::uint32_t(buf[buf.size() - 4 + i]) << (8 * i);
    return v;
  }();
  if (stored_crc != detail::crc32_of(buf.data(), buf.size() - 4))
    throw FormatError("checksum mismatch in " + path.string());

  detail::Cursor cur{buf.data(), buf.size() - 4, 4};
  const std::uint32_t version = cur.u32("version");
  if (version != kIndexVersion)
    throw FormatError("unsupported index version " + std::to_string(version) +
                      " in " + path.string());

  index::IVFIndex ix;
  ix.params.dim = cur.u32("dim");
  ix.params.m = cur.u32("m");
  ix.params.nlist = cur.u32("nlist");
  const std::uint64_t count = cur.u64("count");
  const std::uint32_t flags = cur.u32("flags");
  ix.params.opq_enabled = (flags & 1u) != 0;

  if (ix.params.dim == 0 || ix.params.m == 0 || ix.params.nlist == 0 ||
      ix.params.dim % ix.params.m != 0)
    throw FormatError("inconsistent header in " + path.string());
  const std::uint32_t dsub = ix.params.dim / ix.params.m;

  if (ix.params.opq_enabled) {
    quantizer::OPQRotation r;
    r.dim = ix.params.dim;
    r.values.resize(std::size_t(r.dim) * r.dim);
    cur.f32s(r.values.data(), r.values.size(), "rotation");
    ix.rotation = std::move(r);
  }

  ix.coarse.k = ix.params.nlist;
  ix.coarse.dim = ix.params.dim;
  ix.coarse.values.resize(std::size_t(ix.params.nlist) * ix.params.dim);
  cur.f32s(ix.coarse.values.data(), ix.coarse.values.size(), "coarse");

  ix.codebook.m = ix.params.m;
  ix.codebook.dsub = dsub;
  ix.codebook.centroids.resize(std::size_t(ix.params.m) *
                               quantizer::PQCodebook::ksub * dsub);
  cur.f32s(ix.codebook.centroids.data(), ix.codebook.centroids.size(),
           "codebooks");

  ix.cell_offsets.resize(std::size_t(ix.params.nlist) + 1);
  for (auto& v : ix.cell_offsets) v = cur.u64("cell_offsets");
  ix.ids.resize(count);
  for (auto& v : ix.ids) v = cur.u64("ids");
  ix.codes.resize(count * ix.params.m);
  cur.bytes(ix.codes.data(), ix.codes.size(), "codes");

  if (cur.at != cur.size)
    throw FormatError("trailing bytes at " + std::to_string(cur.at) + " in " +
                      path.string());
  try {
    ix.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid index structure in ") +
                      path.string() + ": " + e.what());
  }
  return ix;
}

/// Latency histories: one decimal microseconds value per line.
inline std::vector<double> load_latency_history(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    char* end = nullptr;
    const double v = std::strtod(line.c_str(), &end);
    if (end == line.c_str() || *end != '\0')
      throw FormatError("bad latency value on line " + std::to_string(lineno) +
                        " of " + path.string());
    if (!(v > 0.0))
      throw FormatError("latency values must be positive (line " +
                        std::to_string(lineno) + " of " + path.string() + ")");
    out.push_back(v);
  }
  if (out.empty())
    throw FormatError("latency history is empty: " + path.string());
  return out;
}

inline void save_latency_history(std::span<const double> values,
                                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  char buf[64];
  for (double v : values) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", v);
    out << buf;
  }
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace annforge::io
