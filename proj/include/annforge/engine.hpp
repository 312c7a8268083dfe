#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "annforge/core.hpp"
#include "annforge/index.hpp"

namespace annforge::engine {

/// Query pipeline, in stage order: rotate the query, score coarse centroids,
/// pick cells, build one lookup table per probed cell, scan codes, keep top-K.

inline std::vector<float> apply_opq(
    std::span<const float> query,
    const std::optional<quantizer::OPQRotation>& rotation) {
  if (!rotation) return {query.begin(), query.end()};
  const std::uint32_t d = rotation->dim;
  if (query.size() != d)
    throw InvalidArgument("apply_opq: query dimension mismatch");
  std::vector<float> out(d);
  const float* R = rotation->values.data();
  for (std::uint32_t i = 0; i < d; ++i) {
    float acc = 0.0f;
    const float* row = R + std::size_t(i) * d;
    for (std::uint32_t j = 0; j < d; ++j) acc += row[j] * query[j];
    out[i] = acc;
  }
  return out;
}

/// Squared L2 distance from the query to every coarse centroid.
inline std::vector<float> ivf_distances(std::span<const float> query,
                                        const quantizer::Centroids& coarse) {
  if (query.size() != coarse.dim)
    throw InvalidArgument("ivf_distances: query dimension mismatch");
  std::vector<float> out(coarse.k);
  for (std::uint32_t c = 0; c < coarse.k; ++c) {
    const float* cent = coarse.values.data() + std::size_t(c) * coarse.dim;
    float acc = 0.0f;
    for (std::uint32_t t = 0; t < coarse.dim; ++t) {
      const float diff = query[t] - cent[t];
      acc += diff * diff;
    }
    out[c] = acc;
  }
  return out;
}

/// The nprobe nearest cells, ascending by (distance, cell id).
inline std::vector<std::uint32_t> select_cells(std::span<const float> distances,
                                               std::uint32_t nprobe) {
  if (nprobe < 1 || nprobe > distances.size())
    throw InvalidArgument("select_cells: nprobe out of range");
  std::vector<ScoredId> cells(distances.size());
  for (std::size_t c = 0; c < distances.size(); ++c)
    cells[c] = {distances[c], c};
  std::partial_sort(cells.begin(), cells.begin() + nprobe, cells.end(),
                    scored_less);
  std::vector<std::uint32_t> out(nprobe);
  for (std::uint32_t i = 0; i < nprobe; ++i)
    out[i] = std::uint32_t(cells[i].id);
  return out;
}

struct DistanceLUT {
  std::uint32_t m = 0;
  std::vector<float> values;  // m * 256

  float at(std::uint32_t j, std::uint8_t c) const {
    return values[std::size_t(j) * quantizer::PQCodebook::ksub + c];
  }
};

namespace detail {

// LUT entries for an already-rotated query: the cell residual scored against
// every sub-centroid.
inline DistanceLUT build_lut_rotated(const index::IVFIndex& ix,
                                     std::span<const float> rotated_query,
                                     std::uint32_t cell_id) {
  const auto& cb = ix.codebook;
  DistanceLUT lut;
  lut.m = cb.m;
  lut.values.resize(std::size_t(cb.m) * quantizer::PQCodebook::ksub);
  std::span<const float> cent = ix.coarse.row(cell_id);
  std::vector<float> residual(ix.params.dim);
  for (std::uint32_t t = 0; t < ix.params.dim; ++t)
    residual[t] = rotated_query[t] - cent[t];
  for (std::uint32_t j = 0; j < cb.m; ++j) {
    const float* r = residual.data() + std::size_t(j) * cb.dsub;
    const float* table = cb.sub_table(j);
    float* out = lut.values.data() + std::size_t(j) * quantizer::PQCodebook::ksub;
    for (std::uint32_t c = 0; c < quantizer::PQCodebook::ksub; ++c) {
      const float* sc = table + std::size_t(c) * cb.dsub;
      float acc = 0.0f;
      for (std::uint32_t t = 0; t < cb.dsub; ++t) {
        const float diff = r[t] - sc[t];
        acc += diff * diff;
      }
      out[c] = acc;
    }
  }
  return lut;
}

}  // namespace detail

inline DistanceLUT build_lut(const index::IVFIndex& ix,
                             std::span<const float> query,
                             std::uint32_t cell_id) {
  if (query.size() != ix.params.dim)
    throw InvalidArgument("build_lut: query dimension mismatch");
  if (cell_id >= ix.params.nlist)
    throw InvalidArgument("build_lut: cell_id out of range");
  const std::vector<float> rq = apply_opq(query, ix.rotation);
  return detail::build_lut_rotated(ix, rq, cell_id);
}

/// Streams one cell's codes through the LUT, emitting (id, distance) pairs.
/// The scan length is padded up to a multiple of lanes; padded slots emit the
/// sentinel id with the maximum finite distance.
template <typename Emit>
inline void adc_scan(const DistanceLUT& lut,
                     std::span<const std::uint8_t> codes,
                     std::span<const std::uint64_t> ids, std::uint32_t lanes,
                     Emit&& emit) {
  if (lanes == 0) throw InvalidArgument("adc_scan: lanes must be positive");
  const std::size_t n = ids.size();
  if (codes.size() != n * lut.m)
    throw InvalidArgument("adc_scan: codes/ids length mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* code = codes.data() + i * lut.m;
    float acc = 0.0f;
    for (std::uint32_t j = 0; j < lut.m; ++j) acc += lut.at(j, code[j]);
    emit(ScoredId{acc, ids[i]});
  }
  const std::size_t padded = (n + lanes - 1) / lanes * lanes;
  for (std::size_t i = n; i < padded; ++i) emit(ScoredId{kMaxDistance, kPadId});
}

struct SearchOptions {
  std::uint32_t lanes = 1;
};

struct SearchResult {
  std::vector<ScoredId> hits;  // exactly K, sentinel-padded at the tail
};

inline SearchResult search(const index::IVFIndex& ix,
                           std::span<const float> query, std::uint32_t nprobe,
                           std::uint32_t k, const SearchOptions& opts = {}) {
  if (query.size() != ix.params.dim)
    throw InvalidArgument("search: query dimension mismatch");
  if (k == 0) throw InvalidArgument("search: k must be positive");

  const std::vector<float> rq = apply_opq(query, ix.rotation);
  const std::vector<float> dists = ivf_distances(rq, ix.coarse);
  const std::vector<std::uint32_t> cells = select_cells(dists, nprobe);

  TopKAccumulator acc(k);
  for (std::uint32_t cell : cells) {
    const DistanceLUT lut = detail::build_lut_rotated(ix, rq, cell);
    adc_scan(lut, ix.cell_codes(cell), ix.cell_ids(cell), opts.lanes,
             [&](ScoredId s) { acc.push(s); });
  }
  return SearchResult{acc.finish()};
}

enum class RecallMode {
  first_nn,      // fraction of queries whose true nearest neighbor is in top-K
  intersection,  // |top-K ids ∩ first K ground-truth ids| / K
};

inline double evaluate_recall(const index::IVFIndex& ix,
                              const VectorSet& queries, const GroundTruth& gt,
                              std::uint32_t nprobe, std::uint32_t k,
                              RecallMode mode = RecallMode::first_nn,
                              const SearchOptions& opts = {}) {
  if (queries.count() != gt.count)
    throw InvalidArgument("evaluate_recall: query/gt count mismatch");
  if (gt.k_gt == 0)
    throw InvalidArgument("evaluate_recall: ground truth is empty");

  double score = 0.0;
  for (std::size_t q = 0; q < queries.count(); ++q) {
    const SearchResult res = search(ix, queries.row(q), nprobe, k, opts);
    std::span<const std::int32_t> truth = gt.row(q);
    if (mode == RecallMode::first_nn) {
      const std::uint64_t want = std::uint64_t(std::uint32_t(truth[0]));
      for (const ScoredId& h : res.hits) {
        if (h.id == want) {
          score += 1.0;
          break;
        }
      }
    } else {
      const std::uint32_t kk = std::min<std::uint32_t>(k, gt.k_gt);
      std::size_t inter = 0;
      for (std::uint32_t t = 0; t < kk; ++t) {
        const std::uint64_t want = std::uint64_t(std::uint32_t(truth[t]));
        for (const ScoredId& h : res.hits)
          if (h.id == want) {
            inter += 1;
            break;
          }
      }
      score += double(inter) / double(k);
    }
  }
  return score / double(queries.count());
}

/// Smallest nprobe reaching the recall goal, by binary search over
/// [1, nlist]; relies on recall being non-decreasing in nprobe.
inline std::optional<std::uint32_t> min_nprobe_for_recall(
    const index::IVFIndex& ix, const VectorSet& queries, const GroundTruth& gt,
    std::uint32_t k, double goal, RecallMode mode = RecallMode::first_nn) {
  std::map<std::uint32_t, double> memo;
  auto recall_at = [&](std::uint32_t nprobe) {
    auto it = memo.find(nprobe);
    if (it != memo.end()) return it->second;
    const double r = evaluate_recall(ix, queries, gt, nprobe, k, mode);
    memo.emplace(nprobe, r);
    return r;
  };

  std::uint32_t lo = 1, hi = ix.params.nlist;
  if (recall_at(hi) < goal) return std::nullopt;
  while (lo < hi) {
    const std::uint32_t mid = lo + (hi - lo) / 2;
    if (recall_at(mid) >= goal)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

}  // namespace annforge::engine
