#pragma once

// Synthetic datasets and exact reference answers for the tests. Everything
// here is deliberately independent of the library's search path: ground
// truth comes from a brute-force double-precision scan.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <annforge/core.hpp>

namespace testsupport {

using annforge::GroundTruth;
using annforge::VectorSet;

using RowMatD =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Gaussian mixture: n points around n_centers well-separated centers.
inline VectorSet make_blobs(std::size_t n, std::uint32_t dim,
                            std::uint32_t n_centers, std::uint64_t seed,
                            float center_scale = 10.0f, float spread = 1.0f) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> unit(0.0f, 1.0f);

  std::vector<float> centers(std::size_t(n_centers) * dim);
  for (float& v : centers) v = center_scale * unit(rng);

  VectorSet vs;
  vs.dim = dim;
  vs.data.resize(n * dim);
  vs.ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = rng() % n_centers;
    const float* cent = centers.data() + c * dim;
    float* row = vs.data.data() + i * dim;
    for (std::uint32_t t = 0; t < dim; ++t) row[t] = cent[t] + spread * unit(rng);
    vs.ids[i] = i;
  }
  return vs;
}

/// Queries drawn as noisy copies of random base points.
inline VectorSet perturb_queries(const VectorSet& base, std::size_t n_queries,
                                 std::uint64_t seed, float sigma = 0.5f) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> unit(0.0f, 1.0f);

  VectorSet qs;
  qs.dim = base.dim;
  qs.data.resize(n_queries * base.dim);
  qs.ids.resize(n_queries);
  for (std::size_t i = 0; i < n_queries; ++i) {
    const std::size_t pick = rng() % base.count();
    const float* src = base.data.data() + pick * base.dim;
    float* row = qs.data.data() + i * base.dim;
    for (std::uint32_t t = 0; t < base.dim; ++t)
      row[t] = src[t] + sigma * unit(rng);
    qs.ids[i] = i;
  }
  return qs;
}

/// Exact k nearest neighbors by squared L2, double precision, ties broken
/// toward the lower row index. Ids are base row indexes.
inline GroundTruth exact_ground_truth(const VectorSet& base,
                                      const VectorSet& queries,
                                      std::uint32_t k_gt) {
  using Entry = std::pair<double, std::int64_t>;  // (distance, row)
  const std::size_t nq = queries.count();
  const std::size_t nb = base.count();
  const std::uint32_t d = base.dim;

  // front = worst kept entry under (distance, id) ordering
  auto better = [](const Entry& a, const Entry& b) {
    return a.first < b.first || (a.first == b.first && a.second < b.second);
  };

  Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      Qf(queries.data.data(), Eigen::Index(nq), d);
  const RowMatD Q = Qf.cast<double>();
  const Eigen::VectorXd qnorm = Q.rowwise().squaredNorm();

  std::vector<std::vector<Entry>> heaps(nq);
  for (auto& h : heaps) h.reserve(k_gt + 1);

  const std::size_t block = 4096;
  for (std::size_t b0 = 0; b0 < nb; b0 += block) {
    const std::size_t bn = std::min(block, nb - b0);
    Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        Bf(base.data.data() + b0 * d, Eigen::Index(bn), d);
    const RowMatD B = Bf.cast<double>();
    const Eigen::VectorXd bnorm = B.rowwise().squaredNorm();
    const RowMatD prod = B * Q.transpose();  // bn x nq

    for (std::size_t q = 0; q < nq; ++q) {
      auto& heap = heaps[q];
      for (std::size_t i = 0; i < bn; ++i) {
        const double dist =
            std::max(0.0, bnorm[Eigen::Index(i)] + qnorm[Eigen::Index(q)] -
                              2.0 * prod(Eigen::Index(i), Eigen::Index(q)));
        const Entry cand{dist, std::int64_t(b0 + i)};
        if (heap.size() < k_gt) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end(), better);
        } else if (better(cand, heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), better);
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end(), better);
        }
      }
    }
  }

  GroundTruth gt;
  gt.k_gt = k_gt;
  gt.count = nq;
  gt.ids.resize(nq * k_gt);
  for (std::size_t q = 0; q < nq; ++q) {
    auto& heap = heaps[q];
    std::sort(heap.begin(), heap.end(), better);
    for (std::uint32_t i = 0; i < k_gt; ++i)
      gt.ids[q * k_gt + i] = std::int32_t(heap[i].second);
  }
  return gt;
}

/// Uniform floats in [lo, hi), deterministic.
inline VectorSet make_uniform(std::size_t n, std::uint32_t dim,
                              std::uint64_t seed, float lo = -1.0f,
                              float hi = 1.0f) {
  std::mt19937_64 rng(seed);
  VectorSet vs;
  vs.dim = dim;
  vs.data.resize(n * dim);
  vs.ids.resize(n);
  const double scale = double(hi) - double(lo);
  for (std::size_t i = 0; i < n; ++i) vs.ids[i] = i;
  for (float& v : vs.data)
    v = float(lo + scale * (double(rng() >> 11) * 0x1.0p-53));
  return vs;
}

/// Random scored entries with unique ids, for selection tests.
inline std::vector<annforge::ScoredId> random_scored(std::size_t n,
                                                     std::uint64_t seed,
                                                     float lo = 0.0f,
                                                     float hi = 100.0f) {
  std::mt19937_64 rng(seed);
  std::vector<annforge::ScoredId> out(n);
  const double scale = double(hi) - double(lo);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].distance = float(lo + scale * (double(rng() >> 11) * 0x1.0p-53));
    out[i].id = i;
  }
  return out;
}

}  // namespace testsupport
