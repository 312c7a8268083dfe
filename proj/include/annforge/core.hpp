#pragma once

#include <algorithm>
#include <cstdint>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace annforge {

/// Sentinel id used to pad result slots that carry no real candidate.
inline constexpr std::uint64_t kPadId = std::numeric_limits<std::uint64_t>::max();

/// Distance carried by padded result slots; largest finite float so padded
/// entries sort after every real candidate.
inline constexpr float kMaxDistance = std::numeric_limits<float>::max();

/// Input bytes violate a file-format contract.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem-level failure (open, read, write).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation precondition was violated.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A (distance, id) candidate. Ordered by distance, ties by ascending id.
struct ScoredId {
  float distance = kMaxDistance;
  std::uint64_t id = kPadId;

  friend bool operator==(const ScoredId&, const ScoredId&) = default;
};

inline bool scored_less(const ScoredId& a, const ScoredId& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  return a.id < b.id;
}

/// A dense set of float vectors with stable 64-bit ids.
struct VectorSet {
  std::uint32_t dim = 0;
  std::vector<float> data;          // count * dim, row-major
  std::vector<std::uint64_t> ids;   // one per row, unique

  std::size_t count() const { return ids.size(); }

  std::span<const float> row(std::size_t i) const {
    return {data.data() + i * dim, dim};
  }

  void validate() const {
    if (dim == 0) throw InvalidArgument("VectorSet: dim must be positive");
    if (data.size() != count() * dim)
      throw InvalidArgument("VectorSet: data size does not match count * dim");
    std::vector<std::uint64_t> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw InvalidArgument("VectorSet: ids must be unique");
  }
};

/// Exact nearest-neighbor lists, one row of k_gt ids per query.
struct GroundTruth {
  std::uint32_t k_gt = 0;
  std::size_t count = 0;
  std::vector<std::int32_t> ids;    // count * k_gt

  std::span<const std::int32_t> row(std::size_t i) const {
    return {ids.data() + i * k_gt, k_gt};
  }
};

/// splitmix64 step; derives independent deterministic seeds from one root seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Keeps the k smallest (distance, id) pairs seen, under the total order
/// (distance, then id). Deterministic regardless of insertion order.
class TopKAccumulator {
 public:
  explicit TopKAccumulator(std::size_t k) : k_(k) {
    if (k == 0) throw InvalidArgument("TopKAccumulator: k must be positive");
    heap_.reserve(k);
  }

  void push(ScoredId cand) {
    if (heap_.size() < k_) {
      heap_.push_back(cand);
      std::push_heap(heap_.begin(), heap_.end(), scored_less);
    } else if (scored_less(cand, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), scored_less);
      heap_.back() = cand;
      std::push_heap(heap_.begin(), heap_.end(), scored_less);
    }
  }

  /// Sorted ascending; padded with (kMaxDistance, kPadId) up to k.
  std::vector<ScoredId> finish() const {
    std::vector<ScoredId> out = heap_;
    std::sort(out.begin(), out.end(), scored_less);
    out.resize(k_, ScoredId{});
    return out;
  }

  std::size_t size() const { return heap_.size(); }

 private:
  std::size_t k_;
  std::vector<ScoredId> heap_;  // max-heap on the total order; front is the
                                // worst kept candidate
};

}  // namespace annforge
