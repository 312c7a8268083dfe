#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <random>
#include <vector>

#include "annforge/core.hpp"

namespace annforge::quantizer {

using RowMatF =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::uint32_t kDefaultKMeansIters = 25;
inline constexpr double kMinRelImprovement = 1e-4;

struct Centroids {
  std::uint32_t k = 0;
  std::uint32_t dim = 0;
  std::vector<float> values;  // k * dim, row-major

  std::span<const float> row(std::size_t i) const {
    return {values.data() + i * dim, dim};
  }
};

struct KMeansStats {
  std::vector<double> distortion;  // one entry per Lloyd iteration
  std::uint32_t iterations = 0;
};

struct PQCodebook {
  static constexpr std::uint32_t ksub = 256;

  std::uint32_t m = 0;
  std::uint32_t dsub = 0;
  std::vector<float> centroids;  // m * ksub * dsub

  std::uint32_t dim() const { return m * dsub; }

  const float* sub_table(std::uint32_t j) const {
    return centroids.data() + std::size_t(j) * ksub * dsub;
  }

  std::span<const float> sub(std::uint32_t j, std::uint32_t c) const {
    return {sub_table(j) + std::size_t(c) * dsub, dsub};
  }
};

struct OPQRotation {
  std::uint32_t dim = 0;
  std::vector<float> values;  // dim * dim, row-major; orthonormal

  static OPQRotation identity(std::uint32_t dim) {
    OPQRotation r;
    r.dim = dim;
    r.values.assign(std::size_t(dim) * dim, 0.0f);
    for (std::uint32_t i = 0; i < dim; ++i) r.values[std::size_t(i) * dim + i] = 1.0f;
    return r;
  }
};

namespace detail {

inline std::uint64_t rand_index(std::mt19937_64& rng, std::uint64_t n) {
  return rng() % n;  // platform-stable; modulo bias irrelevant at these sizes
}

// Assigns every row of data to its nearest centroid (squared L2, ties to the
// lowest centroid index). Fills assignment and the per-point distance
// xnorm + min_c(cnorm - 2 x.c), clamped at zero.
inline void assign_nearest(const float* data, std::size_t n, std::uint32_t dim,
                           const RowMatF& cents,
                           std::vector<std::uint32_t>& assignment,
                           std::vector<float>& assign_dist) {
  const std::size_t k = std::size_t(cents.rows());
  assignment.resize(n);
  assign_dist.resize(n);

  Eigen::Map<const RowMatF> X(data, Eigen::Index(n), dim);
  Eigen::VectorXf cnorm = cents.rowwise().squaredNorm();

  // Cap scratch for the product block at ~64 MB.
  const std::size_t rows_per_block = std::max<std::size_t>(
      1, std::min<std::size_t>(8192, (std::size_t(64) << 20) / (4 * k)));

  const Eigen::Index block_rows = Eigen::Index(rows_per_block);
  RowMatF prod(block_rows, Eigen::Index(k));
  for (std::size_t r0 = 0; r0 < n; r0 += rows_per_block) {
    const std::size_t rows = std::min(rows_per_block, n - r0);
    prod.topRows(Eigen::Index(rows)).noalias() =
        X.middleRows(Eigen::Index(r0), Eigen::Index(rows)) * cents.transpose();
    for (std::size_t r = 0; r < rows; ++r) {
      const float xnorm = X.row(Eigen::Index(r0 + r)).squaredNorm();
      const float* p = prod.data() + r * k;
      std::uint32_t best = 0;
      float best_v = cnorm[0] - 2.0f * p[0];
      for (std::size_t c = 1; c < k; ++c) {
        const float v = cnorm[Eigen::Index(c)] - 2.0f * p[c];
        if (v < best_v) {
          best_v = v;
          best = std::uint32_t(c);
        }
      }
      assignment[r0 + r] = best;
      assign_dist[r0 + r] = std::max(0.0f, xnorm + best_v);
    }
  }
}

// k-means++ seeding over a deterministic subsample.
inline RowMatF seed_plusplus(const float* data, std::size_t n, std::uint32_t dim,
                             std::uint32_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> pick(n);
  for (std::size_t i = 0; i < n; ++i) pick[i] = i;
  const std::size_t sample = std::min<std::size_t>(n, std::size_t(32) * k);
  for (std::size_t i = 0; i < sample; ++i) {
    const std::size_t j = i + std::size_t(rand_index(rng, n - i));
    std::swap(pick[i], pick[j]);
  }
  pick.resize(sample);

  RowMatF S(Eigen::Index(sample), dim);
  for (std::size_t i = 0; i < sample; ++i)
    S.row(Eigen::Index(i)) =
        Eigen::Map<const Eigen::RowVectorXf>(data + pick[i] * dim, dim);
  Eigen::VectorXf snorm = S.rowwise().squaredNorm();

  RowMatF cents(k, dim);
  const std::size_t first = std::size_t(rand_index(rng, sample));
  cents.row(0) = S.row(Eigen::Index(first));

  Eigen::VectorXf d2;
  {
    const float cn = cents.row(0).squaredNorm();
    d2 = (snorm.array() + cn - 2.0f * (S * cents.row(0).transpose()).array())
             .max(0.0f);
  }

  for (std::uint32_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < d2.size(); ++i) total += d2[i];
    std::size_t chosen;
    if (total <= 0.0) {
      chosen = std::size_t(rand_index(rng, sample));
    } else {
      const double r = (double(rng() >> 11) * 0x1.0p-53) * total;
      double acc = 0.0;
      chosen = sample - 1;
      for (std::size_t i = 0; i < sample; ++i) {
        acc += d2[Eigen::Index(i)];
        if (acc > r) {
          chosen = i;
          break;
        }
      }
    }
    cents.row(c) = S.row(Eigen::Index(chosen));
    const float cn = cents.row(c).squaredNorm();
    Eigen::VectorXf dn =
        (snorm.array() + cn - 2.0f * (S * cents.row(c).transpose()).array())
            .max(0.0f);
    d2 = d2.cwiseMin(dn);
  }
  return cents;
}

// Lloyd iterations on a raw buffer, with empty-cluster repair: an empty
// cluster takes the farthest point of the largest cluster.
inline void lloyd(const float* data, std::size_t n, std::uint32_t dim,
                  RowMatF& cents, std::uint32_t max_iters, KMeansStats* stats,
                  double min_rel_improve = kMinRelImprovement) {
  const std::size_t k = std::size_t(cents.rows());
  std::vector<std::uint32_t> assignment;
  std::vector<float> assign_dist;
  std::vector<double> sums(k * dim);
  std::vector<std::uint64_t> counts(k);

  double prev = std::numeric_limits<double>::infinity();
  for (std::uint32_t it = 0; it < max_iters; ++it) {
    assign_nearest(data, n, dim, cents, assignment, assign_dist);

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    double distortion = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t a = assignment[i];
      counts[a] += 1;
      double* s = sums.data() + std::size_t(a) * dim;
      const float* x = data + i * dim;
      for (std::uint32_t t = 0; t < dim; ++t) s[t] += x[t];
      distortion += assign_dist[i];
    }

    if (stats) {
      stats->distortion.push_back(distortion);
      stats->iterations = it + 1;
    }

    for (std::size_t e = 0; e < k; ++e) {
      if (counts[e] != 0) continue;
      std::size_t big = 0;
      for (std::size_t c = 1; c < k; ++c)
        if (counts[c] > counts[big]) big = c;
      if (counts[big] <= 1) continue;
      std::size_t far = n;
      float far_d = -1.0f;
      for (std::size_t i = 0; i < n; ++i) {
        if (assignment[i] != big) continue;
        if (assign_dist[i] > far_d) {
          far_d = assign_dist[i];
          far = i;
        }
      }
      if (far == n) continue;
      const float* x = data + far * dim;
      double* se = sums.data() + e * dim;
      double* sb = sums.data() + big * dim;
      for (std::uint32_t t = 0; t < dim; ++t) {
        se[t] = x[t];
        sb[t] -= x[t];
      }
      counts[e] = 1;
      counts[big] -= 1;
      assignment[far] = std::uint32_t(e);
      assign_dist[far] = 0.0f;
    }

    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      const double inv = 1.0 / double(counts[c]);
      const double* s = sums.data() + c * dim;
      for (std::uint32_t t = 0; t < dim; ++t)
        cents(Eigen::Index(c), Eigen::Index(t)) = float(s[t] * inv);
    }

    if (distortion == 0.0) break;
    if (prev != std::numeric_limits<double>::infinity() &&
        prev - distortion < min_rel_improve * prev)
      break;
    prev = distortion;
  }
}

}  // namespace detail

/// Lloyd k-means with k-means++ seeding. Deterministic for a fixed seed.
inline Centroids kmeans_buffer(const float* data, std::size_t n,
                               std::uint32_t dim, std::uint32_t k,
                               std::uint32_t max_iters = kDefaultKMeansIters,
                               std::uint64_t seed = 0,
                               KMeansStats* stats = nullptr) {
  if (k == 0) throw InvalidArgument("kmeans: k must be positive");
  if (n < k) throw InvalidArgument("kmeans: need at least k points");
  if (dim == 0) throw InvalidArgument("kmeans: dim must be positive");

  std::mt19937_64 rng(mix_seed(seed, 0x6b6d));
  RowMatF cents = detail::seed_plusplus(data, n, dim, k, rng);
  detail::lloyd(data, n, dim, cents, max_iters, stats);

  Centroids out;
  out.k = k;
  out.dim = dim;
  out.values.assign(cents.data(), cents.data() + std::size_t(k) * dim);
  return out;
}

inline Centroids kmeans(const VectorSet& points, std::uint32_t k,
                        std::uint32_t max_iters = kDefaultKMeansIters,
                        std::uint64_t seed = 0, KMeansStats* stats = nullptr) {
  return kmeans_buffer(points.data.data(), points.count(), points.dim, k,
                       max_iters, seed, stats);
}

/// Nearest sub-centroid per sub-space, ties to the lowest index.
inline void encode_into(const PQCodebook& cb, const float* v,
                        std::uint8_t* out) {
  for (std::uint32_t j = 0; j < cb.m; ++j) {
    const float* sub = v + std::size_t(j) * cb.dsub;
    const float* table = cb.sub_table(j);
    std::uint32_t best = 0;
    float best_d = std::numeric_limits<float>::infinity();
    for (std::uint32_t c = 0; c < PQCodebook::ksub; ++c) {
      const float* cent = table + std::size_t(c) * cb.dsub;
      float d = 0.0f;
      for (std::uint32_t t = 0; t < cb.dsub; ++t) {
        const float diff = sub[t] - cent[t];
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    out[j] = std::uint8_t(best);
  }
}

inline std::vector<std::uint8_t> encode(const PQCodebook& cb,
                                        std::span<const float> v) {
  if (v.size() != cb.dim())
    throw InvalidArgument("encode: vector dimension does not match codebook");
  std::vector<std::uint8_t> code(cb.m);
  encode_into(cb, v.data(), code.data());
  return code;
}

inline void reconstruct_into(const PQCodebook& cb, const std::uint8_t* code,
                             float* out) {
  for (std::uint32_t j = 0; j < cb.m; ++j) {
    std::span<const float> cent = cb.sub(j, code[j]);
    std::memcpy(out + std::size_t(j) * cb.dsub, cent.data(),
                cb.dsub * sizeof(float));
  }
}

inline std::vector<float> reconstruct(const PQCodebook& cb,
                                      std::span<const std::uint8_t> code) {
  if (code.size() != cb.m)
    throw InvalidArgument("reconstruct: code length does not match codebook");
  std::vector<float> v(cb.dim());
  reconstruct_into(cb, code.data(), v.data());
  return v;
}

namespace detail {

inline void gather_subspace(const float* data, std::size_t n, std::uint32_t dim,
                            std::uint32_t dsub, std::uint32_t j,
                            std::vector<float>& out) {
  out.resize(n * dsub);
  for (std::size_t i = 0; i < n; ++i)
    std::memcpy(out.data() + i * dsub, data + i * dim + std::size_t(j) * dsub,
                dsub * sizeof(float));
}

}  // namespace detail

/// Independent 256-centroid k-means per sub-space.
inline PQCodebook train_pq_buffer(const float* data, std::size_t n,
                                  std::uint32_t dim, std::uint32_t m,
                                  std::uint32_t max_iters = kDefaultKMeansIters,
                                  std::uint64_t seed = 0) {
  if (m == 0 || dim % m != 0)
    throw InvalidArgument("train_pq: dim must be a positive multiple of m");
  if (n < PQCodebook::ksub)
    throw InvalidArgument("train_pq: need at least 256 training points");

  const std::uint32_t dsub = dim / m;
  PQCodebook cb;
  cb.m = m;
  cb.dsub = dsub;
  cb.centroids.resize(std::size_t(m) * PQCodebook::ksub * dsub);

  std::vector<float> sub;
  for (std::uint32_t j = 0; j < m; ++j) {
    detail::gather_subspace(data, n, dim, dsub, j, sub);
    Centroids c = kmeans_buffer(sub.data(), n, dsub, PQCodebook::ksub,
                                max_iters, mix_seed(seed, 0x7071 + j));
    std::memcpy(cb.centroids.data() +
                    std::size_t(j) * PQCodebook::ksub * dsub,
                c.values.data(), c.values.size() * sizeof(float));
  }
  return cb;
}

inline PQCodebook train_pq(const VectorSet& data, std::uint32_t m,
                           std::uint32_t max_iters = kDefaultKMeansIters,
                           std::uint64_t seed = 0) {
  return train_pq_buffer(data.data.data(), data.count(), data.dim, m, max_iters,
                         seed);
}

struct OPQTrainOptions {
  std::uint32_t pq_iters_first = 15;  // fresh training, first outer round
  std::uint32_t pq_iters_warm = 5;    // warm-started rounds
};

struct OPQResult {
  OPQRotation rotation;
  PQCodebook codebook;
  std::vector<double> distortion;  // rotated-space distortion per outer round
};

/// Alternating minimization: PQ training in the rotated space, then an
/// orthogonal Procrustes update of the rotation against the reconstructions.
/// outer_iters == 0 degenerates to plain PQ with an identity rotation.
inline OPQResult train_opq(const VectorSet& data, std::uint32_t m,
                           std::uint32_t outer_iters = 10,
                           std::uint64_t seed = 0,
                           const OPQTrainOptions& opts = {}) {
  if (m == 0 || data.dim % m != 0)
    throw InvalidArgument("train_opq: dim must be a positive multiple of m");

  OPQResult res;
  if (outer_iters == 0) {
    res.rotation = OPQRotation::identity(data.dim);
    res.codebook = train_pq(data, m, kDefaultKMeansIters, mix_seed(seed, 0x50));
    return res;
  }
  if (data.count() < PQCodebook::ksub)
    throw InvalidArgument("train_opq: need at least 256 training points");

  const std::size_t n = data.count();
  const std::uint32_t d = data.dim;
  const std::uint32_t dsub = d / m;

  Eigen::Map<const RowMatF> X(data.data.data(), Eigen::Index(n), d);
  RowMatF R = RowMatF::Identity(d, d);
  RowMatF Xr(Eigen::Index(n), d);
  PQCodebook cb;

  std::vector<float> sub;
  std::vector<std::uint8_t> code(m);
  std::vector<float> recon(d);

  for (std::uint32_t t = 0; t < outer_iters; ++t) {
    Xr.noalias() = X * R.transpose();

    if (t == 0) {
      cb = train_pq_buffer(Xr.data(), n, d, m, opts.pq_iters_first,
                           mix_seed(seed, 0x100));
    } else {
      for (std::uint32_t j = 0; j < m; ++j) {
        detail::gather_subspace(Xr.data(), n, d, dsub, j, sub);
        RowMatF cj(PQCodebook::ksub, dsub);
        std::memcpy(cj.data(),
                    cb.centroids.data() + std::size_t(j) * PQCodebook::ksub * dsub,
                    cj.size() * sizeof(float));
        detail::lloyd(sub.data(), n, dsub, cj, opts.pq_iters_warm, nullptr, 0.0);
        std::memcpy(cb.centroids.data() + std::size_t(j) * PQCodebook::ksub * dsub,
                    cj.data(), cj.size() * sizeof(float));
      }
    }

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
    double distortion = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const float* xr = Xr.data() + i * d;
      encode_into(cb, xr, code.data());
      reconstruct_into(cb, code.data(), recon.data());
      for (std::uint32_t a = 0; a < d; ++a) {
        const double diff = double(xr[a]) - double(recon[a]);
        distortion += diff * diff;
      }
      Eigen::Map<const Eigen::RowVectorXf> xrow(data.data.data() + i * d, d);
      Eigen::Map<const Eigen::RowVectorXf> yrow(recon.data(), d);
      A.noalias() += xrow.transpose().cast<double>() * yrow.cast<double>();
    }
    res.distortion.push_back(distortion);

    if (t + 1 < outer_iters) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(
          A, Eigen::ComputeFullU | Eigen::ComputeFullV);
      Eigen::MatrixXd Rd = svd.matrixV() * svd.matrixU().transpose();
      R = Rd.cast<float>();
    }
  }

  res.rotation.dim = d;
  res.rotation.values.assign(R.data(), R.data() + std::size_t(d) * d);
  res.codebook = cb;
  return res;
}

}  // namespace annforge::quantizer
