#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "annforge/core.hpp"

namespace annforge::selection {

/// Cycle models and functional simulations of the K-selection fabrics. All
/// comparisons use the (distance, id) total order, so ties resolve by
/// ascending id everywhere.

inline bool is_pow2(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

/// Depth in compare-swap rounds of a width-w bitonic sort network:
/// log2(w) * (1 + log2(w)) / 2.
inline std::uint64_t bitonic_sort_latency(std::uint32_t w) {
  if (!is_pow2(w) || w < 2)
    throw InvalidArgument("bitonic_sort_latency: width must be a power of two >= 2");
  const std::uint64_t lg = std::uint64_t(std::countr_zero(std::uint32_t(w)));
  return lg * (1 + lg) / 2;
}

/// In-place bitonic network, ascending. Width must be a power of two.
inline void bitonic_sort_inplace(std::span<ScoredId> v) {
  const std::size_t n = v.size();
  if (!is_pow2(n))
    throw InvalidArgument("bitonic_sort: width must be a power of two");
  for (std::size_t k = 2; k <= n; k <<= 1) {
    for (std::size_t j = k >> 1; j > 0; j >>= 1) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t l = i ^ j;
        if (l <= i) continue;
        const bool up = (i & k) == 0;
        if (up ? scored_less(v[l], v[i]) : scored_less(v[i], v[l]))
          std::swap(v[i], v[l]);
      }
    }
  }
}

inline std::vector<ScoredId> bitonic_sort(std::vector<ScoredId> v) {
  bitonic_sort_inplace(v);
  return v;
}

/// Smallest w of two ascending w-arrays: one compare stage against the
/// reversed partner, then a half-cleaner. Latency model: log2(w) + 1 rounds.
inline std::vector<ScoredId> bitonic_partial_merge(std::span<const ScoredId> a,
                                                   std::span<const ScoredId> b) {
  const std::size_t w = a.size();
  if (w != b.size() || !is_pow2(w))
    throw InvalidArgument(
        "bitonic_partial_merge: arrays must share one power-of-two width");
  std::vector<ScoredId> out(w);
  for (std::size_t i = 0; i < w; ++i) {
    const ScoredId& x = a[i];
    const ScoredId& y = b[w - 1 - i];
    out[i] = scored_less(x, y) ? x : y;
  }
  for (std::size_t j = w >> 1; j > 0; j >>= 1) {
    for (std::size_t i = 0; i < w; ++i) {
      const std::size_t l = i ^ j;
      if (l > i && scored_less(out[l], out[i])) std::swap(out[i], out[l]);
    }
  }
  return out;
}

struct SystolicRun {
  std::vector<ScoredId> contents;  // s entries, ascending, sentinel-padded
  std::uint64_t ingest_cycles = 0;
  std::uint64_t drain_cycles = 0;
  std::uint64_t total_cycles = 0;
};

/// Register-array priority queue driven literally: each input takes two
/// cycles. Cycle one replaces the root (the running maximum) when the input
/// is smaller and compare-swaps pairs (1,2), (3,4), ...; cycle two
/// compare-swaps pairs (0,1), (2,3), .... Draining costs 2s cycles.
inline SystolicRun systolic_replace_run(std::uint32_t s,
                                        std::span<const ScoredId> inputs) {
  if (s == 0) throw InvalidArgument("systolic_replace_run: s must be positive");
  std::vector<ScoredId> q(s);  // descending toward the tail; q[0] is the max

  auto order_pair = [&](std::size_t i) {
    if (scored_less(q[i], q[i + 1])) std::swap(q[i], q[i + 1]);
  };

  for (const ScoredId& x : inputs) {
    if (scored_less(x, q[0])) q[0] = x;
    for (std::size_t i = 1; i + 1 < s; i += 2) order_pair(i);
    for (std::size_t i = 0; i + 1 < s; i += 2) order_pair(i);
  }

  SystolicRun run;
  run.contents.assign(q.begin(), q.end());
  std::sort(run.contents.begin(), run.contents.end(), scored_less);
  run.ingest_cycles = 2 * std::uint64_t(inputs.size());
  run.drain_cycles = 2 * std::uint64_t(s);
  run.total_cycles = run.ingest_cycles + run.drain_cycles;
  return run;
}

enum class CycleComposition {
  overlap,  // level-2 ingestion pipelined with level-1: max of the two
  serial,   // level-2 strictly after level-1: sum
};

struct HPQConfig {
  std::uint32_t z = 0;  // producer streams, one element per cycle each
  std::uint32_t s = 0;
  std::uint32_t level1_queues = 0;  // each stream splits into two substreams

  static HPQConfig for_streams(std::uint32_t z, std::uint32_t s) {
    if (z == 0 || s == 0)
      throw InvalidArgument("HPQConfig: z and s must be positive");
    return {z, s, 2 * z};
  }
};

/// Analytic cycles for a two-level queue hierarchy: level-1 queues ingest at
/// one element per two cycles, the level-2 queue then absorbs every level-1
/// slot (queues * s candidates), and the result drains in 2s cycles.
inline std::uint64_t hpq_cycles(double total_inputs, std::uint32_t queues,
                                std::uint32_t s,
                                CycleComposition comp = CycleComposition::overlap) {
  if (queues == 0 || s == 0)
    throw InvalidArgument("hpq_cycles: queues and s must be positive");
  const std::uint64_t level1 =
      2 * std::uint64_t(std::ceil(total_inputs / double(queues)));
  const std::uint64_t level2 = 2 * std::uint64_t(queues) * s;
  const std::uint64_t body =
      comp == CycleComposition::overlap ? std::max(level1, level2)
                                        : level1 + level2;
  return body + 2 * std::uint64_t(s);
}

struct SelectRun {
  std::vector<ScoredId> results;  // s entries, ascending, sentinel-padded
  std::uint64_t cycles = 0;
};

namespace detail {

inline std::vector<ScoredId> top_s(const std::vector<ScoredId>& pool,
                                   std::uint32_t s) {
  TopKAccumulator acc(s);
  for (const ScoredId& e : pool) acc.push(e);
  return acc.finish();
}

}  // namespace detail

/// Two-level hierarchical priority queue over z input streams. Each stream
/// splits into even/odd substreams feeding capacity-s queues; the level-2
/// queue selects over all level-1 contents.
inline SelectRun hpq_select(const std::vector<std::vector<ScoredId>>& streams,
                            std::uint32_t s,
                            CycleComposition comp = CycleComposition::overlap) {
  const HPQConfig cfg =
      HPQConfig::for_streams(std::uint32_t(streams.size()), s);

  std::vector<ScoredId> pool;
  pool.reserve(std::size_t(cfg.level1_queues) * s);
  std::uint64_t level1_max = 0;
  for (const auto& stream : streams) {
    for (int parity = 0; parity < 2; ++parity) {
      std::vector<ScoredId> sub;
      sub.reserve((stream.size() + 1) / 2);
      for (std::size_t i = std::size_t(parity); i < stream.size(); i += 2)
        sub.push_back(stream[i]);
      level1_max = std::max(level1_max, 2 * std::uint64_t(sub.size()));
      const std::vector<ScoredId> kept = detail::top_s(sub, s);
      pool.insert(pool.end(), kept.begin(), kept.end());
    }
  }

  SelectRun run;
  run.results = detail::top_s(pool, s);
  const std::uint64_t level2 = 2 * std::uint64_t(cfg.level1_queues) * s;
  const std::uint64_t body = comp == CycleComposition::overlap
                                 ? std::max(level1_max, level2)
                                 : level1_max + level2;
  run.cycles = body + 2 * std::uint64_t(s);
  return run;
}

struct HSMPQGConfig {
  std::uint32_t z = 0;
  std::uint32_t s = 0;
  std::uint32_t sort_width = 0;
  std::uint32_t num_sorters = 0;
  std::uint32_t num_mergers = 0;

  /// Sort width is the smallest power of two >= s, floored at 16; sorters
  /// cover the z streams; valid only when s < z.
  static HSMPQGConfig plan(std::uint32_t z, std::uint32_t s) {
    if (z == 0 || s == 0)
      throw InvalidArgument("HSMPQGConfig: z and s must be positive");
    if (s >= z)
      throw InvalidArgument(
          "HSMPQGConfig: requires s < z; use the plain queue hierarchy");
    HSMPQGConfig cfg;
    cfg.z = z;
    cfg.s = s;
    cfg.sort_width = std::max<std::uint32_t>(16, std::bit_ceil(s));
    cfg.num_sorters = (z + cfg.sort_width - 1) / cfg.sort_width;
    cfg.num_mergers = cfg.num_sorters - 1;
    return cfg;
  }
};

/// Analytic cycles for the sort-merge group: one wave of z elements per
/// cycle, plus pipeline fill through the sort and merge networks, plus the
/// tail-queue drain.
inline std::uint64_t hsmpqg_cycles(double total_inputs, std::uint32_t z,
                                   std::uint32_t s) {
  const HSMPQGConfig cfg = HSMPQGConfig::plan(z, s);
  const std::uint64_t lg = std::uint64_t(std::countr_zero(cfg.sort_width));
  return std::uint64_t(std::ceil(total_inputs / double(z))) +
         bitonic_sort_latency(cfg.sort_width) +
         std::uint64_t(cfg.num_mergers) * (lg + 1) + 2 * std::uint64_t(s);
}

/// Hybrid sort-merge queue group: every cycle one wave of z stream heads is
/// sorted in width-w blocks, partial-merged down to one block, and the s
/// smallest of that block feed a small tail hierarchy. Missing stream
/// elements and dummy lanes carry maximum-finite sentinels.
inline SelectRun hsmpqg_select(const std::vector<std::vector<ScoredId>>& streams,
                               std::uint32_t s) {
  const HSMPQGConfig cfg =
      HSMPQGConfig::plan(std::uint32_t(streams.size()), s);
  const std::uint32_t w = cfg.sort_width;

  std::size_t waves = 0;
  double total = 0.0;
  for (const auto& stream : streams) {
    waves = std::max(waves, stream.size());
    total += double(stream.size());
  }

  TopKAccumulator tail(s);
  std::vector<ScoredId> block(w);
  for (std::size_t t = 0; t < waves; ++t) {
    std::vector<ScoredId> merged;
    for (std::uint32_t b = 0; b < cfg.num_sorters; ++b) {
      for (std::uint32_t lane = 0; lane < w; ++lane) {
        const std::size_t sidx = std::size_t(b) * w + lane;
        block[lane] = (sidx < streams.size() && t < streams[sidx].size())
                          ? streams[sidx][t]
                          : ScoredId{};
      }
      bitonic_sort_inplace(block);
      merged = (b == 0) ? block : bitonic_partial_merge(merged, block);
    }
    for (std::uint32_t i = 0; i < std::min(s, w); ++i) tail.push(merged[i]);
  }

  SelectRun run;
  run.results = tail.finish();
  run.cycles = hsmpqg_cycles(total, cfg.z, s);
  return run;
}

}  // namespace annforge::selection
