#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "annforge/core.hpp"
#include "annforge/quantizer.hpp"

namespace annforge::index {

struct IndexParams {
  std::uint32_t nlist = 0;
  std::uint32_t m = 0;
  std::uint32_t dim = 0;
  bool opq_enabled = false;
};

/// Inverted-file index with product-quantized residuals. Cells are stored
/// contiguously: ids and codes for cell c live in [cell_offsets[c],
/// cell_offsets[c+1]), in dataset order.
struct IVFIndex {
  IndexParams params;
  quantizer::Centroids coarse;                 // nlist x dim, rotated space
  quantizer::PQCodebook codebook;              // trained on residuals
  std::optional<quantizer::OPQRotation> rotation;
  std::vector<std::uint64_t> cell_offsets;     // nlist + 1
  std::vector<std::uint64_t> ids;              // count
  std::vector<std::uint8_t> codes;             // count * m

  std::size_t count() const { return ids.size(); }

  std::size_t cell_size(std::uint32_t c) const {
    return cell_offsets[c + 1] - cell_offsets[c];
  }

  std::span<const std::uint64_t> cell_ids(std::uint32_t c) const {
    return {ids.data() + cell_offsets[c], cell_size(c)};
  }

  std::span<const std::uint8_t> cell_codes(std::uint32_t c) const {
    return {codes.data() + cell_offsets[c] * params.m,
            cell_size(c) * params.m};
  }

  void validate() const {
    if (cell_offsets.size() != std::size_t(params.nlist) + 1)
      throw InvalidArgument("IVFIndex: cell_offsets size mismatch");
    if (cell_offsets.front() != 0 || cell_offsets.back() != count())
      throw InvalidArgument("IVFIndex: cell_offsets must span all entries");
    if (!std::is_sorted(cell_offsets.begin(), cell_offsets.end()))
      throw InvalidArgument("IVFIndex: cell_offsets must be non-decreasing");
    if (codes.size() != count() * params.m)
      throw InvalidArgument("IVFIndex: codes size mismatch");
  }
};

struct CellStats {
  std::vector<std::uint64_t> sizes;  // one per cell

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto s : sizes) t += s;
    return t;
  }
};

inline CellStats cell_stats(const IVFIndex& ix) {
  CellStats st;
  st.sizes.resize(ix.params.nlist);
  for (std::uint32_t c = 0; c < ix.params.nlist; ++c)
    st.sizes[c] = ix.cell_size(c);
  return st;
}

/// Expected number of stored entries scanned when probing nprobe cells,
/// under size-biased cell selection: nprobe * sum(s_i^2) / sum(s_i),
/// clipped at the total entry count.
inline double expected_scanned(const CellStats& st, std::uint32_t nprobe) {
  if (nprobe < 1 || nprobe > st.sizes.size())
    throw InvalidArgument("expected_scanned: nprobe out of range");
  double total = 0.0, sumsq = 0.0;
  for (auto s : st.sizes) {
    total += double(s);
    sumsq += double(s) * double(s);
  }
  if (total == 0.0) return 0.0;
  return std::min(double(nprobe) * sumsq / total, total);
}

/// Storage bytes for count entries: m code bytes plus a 4-byte id each.
inline double memory_footprint(std::uint64_t count, std::uint32_t m) {
  return double(count) * (double(m) + 4.0);
}

struct BuildOptions {
  std::uint32_t kmeans_iters = quantizer::kDefaultKMeansIters;
  std::uint32_t pq_iters = quantizer::kDefaultKMeansIters;
  std::uint32_t opq_outer_iters = 10;
  std::size_t opq_sample = 65536;  // rotation is trained on a subsample
};

/// Trains coarse centroids and residual PQ codebook, then encodes every
/// vector into the cell of its nearest coarse centroid (ties to the lowest
/// cell id). With OPQ enabled the data is rotated first and the coarse
/// centroids live in the rotated space.
inline IVFIndex build_ivf(const VectorSet& data, std::uint32_t nlist,
                          std::uint32_t m, bool opq_enabled,
                          std::uint64_t seed, const BuildOptions& opts = {}) {
  if (nlist == 0) throw InvalidArgument("build_ivf: nlist must be positive");
  if (m == 0 || data.dim % m != 0)
    throw InvalidArgument("build_ivf: dim must be a positive multiple of m");
  if (data.count() < std::max<std::size_t>(nlist, quantizer::PQCodebook::ksub))
    throw InvalidArgument("build_ivf: need at least max(nlist, 256) vectors");

  const std::size_t n = data.count();
  const std::uint32_t d = data.dim;

  IVFIndex ix;
  ix.params = {nlist, m, d, opq_enabled};

  const float* working = data.data.data();
  std::vector<float> rotated;
  if (opq_enabled) {
    const std::size_t sample = std::min(n, opts.opq_sample);
    VectorSet train;
    train.dim = d;
    train.data.assign(data.data.begin(), data.data.begin() + sample * d);
    train.ids.resize(sample);
    for (std::size_t i = 0; i < sample; ++i) train.ids[i] = i;
    quantizer::OPQResult opq = quantizer::train_opq(
        train, m, opts.opq_outer_iters, mix_seed(seed, 0x0a));
    ix.rotation = std::move(opq.rotation);

    rotated.resize(n * d);
    Eigen::Map<const quantizer::RowMatF> X(data.data.data(), Eigen::Index(n), d);
    Eigen::Map<const quantizer::RowMatF> R(ix.rotation->values.data(), d, d);
    Eigen::Map<quantizer::RowMatF> Xr(rotated.data(), Eigen::Index(n), d);
    Xr.noalias() = X * R.transpose();
    working = rotated.data();
  }

  ix.coarse = quantizer::kmeans_buffer(working, n, d, nlist, opts.kmeans_iters,
                                       mix_seed(seed, 0x0b));

  std::vector<std::uint32_t> assignment;
  std::vector<float> assign_dist;
  {
    quantizer::RowMatF cents(nlist, d);
    std::copy(ix.coarse.values.begin(), ix.coarse.values.end(), cents.data());
    quantizer::detail::assign_nearest(working, n, d, cents, assignment,
                                      assign_dist);
  }

  std::vector<float> residuals(n * std::size_t(d));
  for (std::size_t i = 0; i < n; ++i) {
    const float* x = working + i * d;
    std::span<const float> c = ix.coarse.row(assignment[i]);
    float* r = residuals.data() + i * d;
    for (std::uint32_t t = 0; t < d; ++t) r[t] = x[t] - c[t];
  }

  ix.codebook = quantizer::train_pq_buffer(residuals.data(), n, d, m,
                                           opts.pq_iters, mix_seed(seed, 0x0c));

  std::vector<std::uint64_t> counts(nlist, 0);
  for (std::size_t i = 0; i < n; ++i) counts[assignment[i]] += 1;
  ix.cell_offsets.assign(std::size_t(nlist) + 1, 0);
  for (std::uint32_t c = 0; c < nlist; ++c)
    ix.cell_offsets[c + 1] = ix.cell_offsets[c] + counts[c];

  ix.ids.resize(n);
  ix.codes.resize(n * std::size_t(m));
  std::vector<std::uint64_t> cursor(ix.cell_offsets.begin(),
                                    ix.cell_offsets.end() - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t pos = cursor[assignment[i]]++;
    ix.ids[pos] = data.ids[i];
    quantizer::encode_into(ix.codebook, residuals.data() + i * d,
                           ix.codes.data() + pos * m);
  }
  return ix;
}

}  // namespace annforge::index
