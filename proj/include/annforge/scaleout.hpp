#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "annforge/core.hpp"

namespace annforge::scaleout {

/// Network model: per message, each endpoint pays an overhead o, the wire
/// adds latency L, and payload costs G nanoseconds per byte. All public
/// quantities are microseconds.
struct LogGPParams {
  double latency_us = 6.0;
  double overhead_us = 4.7;
  double gap_ns_per_byte = 0.73;
  double merge_us = 1.0;  // per-level combine work in reductions
};

/// Cost of a binary-tree broadcast or reduction over n nodes. Each of the
/// ceil(log2 n) levels moves one message of the given size; reductions add
/// merge work per level. A single node communicates nothing.
inline double tree_collective_cost(std::uint32_t n, double bytes,
                                   const LogGPParams& p, bool with_merge) {
  if (n == 0) throw InvalidArgument("tree_collective_cost: n must be >= 1");
  if (bytes < 0) throw InvalidArgument("tree_collective_cost: negative bytes");
  if (n == 1) return 0.0;
  const unsigned levels = std::bit_width(n - 1);  // ceil(log2 n)
  const double per_level = p.overhead_us + p.latency_us + p.overhead_us +
                           p.gap_ns_per_byte * bytes / 1000.0 +
                           (with_merge ? p.merge_us : 0.0);
  return double(levels) * per_level;
}

struct ScaleoutOptions {
  bool broadcast = true;
  bool reduce = true;
};

struct LatencySummary {
  double median_us = 0;
  double p95_us = 0;
  double p99_us = 0;
};

namespace detail {

inline double nearest_rank(const std::vector<double>& sorted, double q) {
  const double t = double(sorted.size());
  std::size_t idx = std::size_t(std::ceil(q * t));
  if (idx > 0) --idx;
  if (idx >= sorted.size()) idx = sorted.size() - 1;
  return sorted[idx];
}

}  // namespace detail

/// End-to-end query latency samples for a query fanned out to n_acc
/// accelerators: broadcast the query down a tree, wait for the slowest
/// shard (each shard's latency drawn from the measured history), reduce
/// the n_acc partial top-k lists back up. Sorted ascending.
///
/// Trial t draws with its own generator seeded from (seed, t), and draws
/// shard latencies sequentially, so growing n_acc extends each trial's
/// draw prefix instead of reshuffling it.
inline std::vector<double> sample_latencies(std::span<const double> history_us,
                                            std::uint32_t n_acc,
                                            const LogGPParams& params,
                                            std::uint32_t k,
                                            double query_bytes,
                                            std::uint32_t n_samples,
                                            std::uint64_t seed,
                                            const ScaleoutOptions& options = {}) {
  if (history_us.empty())
    throw InvalidArgument("sample_latencies: empty latency history");
  for (double v : history_us)
    if (!(v > 0))
      throw InvalidArgument("sample_latencies: history values must be > 0");
  if (n_acc == 0) throw InvalidArgument("sample_latencies: n_acc must be >= 1");
  if (n_samples == 0)
    throw InvalidArgument("sample_latencies: need at least one sample");

  const double bcast =
      options.broadcast ? tree_collective_cost(n_acc, query_bytes, params, false)
                        : 0.0;
  const double reduce =
      options.reduce ? tree_collective_cost(n_acc, double(k) * 8.0, params, true)
                     : 0.0;

  std::vector<double> totals(n_samples);
  for (std::uint32_t t = 0; t < n_samples; ++t) {
    std::mt19937_64 rng(mix_seed(seed, t));
    double worst = 0.0;
    for (std::uint32_t a = 0; a < n_acc; ++a) {
      const double v = history_us[std::size_t(rng() % history_us.size())];
      worst = std::max(worst, v);
    }
    totals[t] = bcast + worst + reduce;
  }
  std::sort(totals.begin(), totals.end());
  return totals;
}

/// Median, P95, and P99 (nearest-rank) of the sampled latency distribution.
inline LatencySummary distributed_latency(std::span<const double> history_us,
                                          std::uint32_t n_acc,
                                          const LogGPParams& params,
                                          std::uint32_t k,
                                          double query_bytes,
                                          std::uint32_t n_samples,
                                          std::uint64_t seed,
                                          const ScaleoutOptions& options = {}) {
  const auto totals = sample_latencies(history_us, n_acc, params, k,
                                       query_bytes, n_samples, seed, options);
  LatencySummary s;
  s.median_us = detail::nearest_rank(totals, 0.50);
  s.p95_us = detail::nearest_rank(totals, 0.95);
  s.p99_us = detail::nearest_rank(totals, 0.99);
  return s;
}

}  // namespace annforge::scaleout
