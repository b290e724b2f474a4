#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "seriescore/error.hpp"

namespace seriescore {

using SeriesId = std::uint32_t;

/// A fixed-length single-precision data series. All values are finite.
class Series {
 public:
  Series() = default;
  explicit Series(std::vector<float> values);

  std::size_t length() const noexcept { return values_.size(); }
  std::span<const float> values() const noexcept { return values_; }
  operator std::span<const float>() const noexcept { return values_; }
  float operator[](std::size_t i) const noexcept { return values_[i]; }

  friend bool operator==(const Series&, const Series&) = default;

 private:
  std::vector<float> values_;
};

/// Dense, row-major collection of equal-length series addressed by id 0..count-1.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t length, std::vector<float> values);

  std::size_t count() const noexcept { return length_ == 0 ? 0 : values_.size() / length_; }
  std::size_t length() const noexcept { return length_; }
  bool empty() const noexcept { return values_.empty(); }

  std::span<const float> series(SeriesId id) const noexcept {
    return {values_.data() + static_cast<std::size_t>(id) * length_, length_};
  }
  std::span<const float> raw() const noexcept { return values_; }

  void append(std::span<const float> series);

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::size_t length_ = 0;
  std::vector<float> values_;
};

struct Neighbor {
  SeriesId id = 0;
  double sq_distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Ascending by (squared distance, id); ids distinct.
using NeighborSet = std::vector<Neighbor>;

struct AccessStats {
  std::uint64_t series_examined = 0;
  std::uint64_t random_accesses = 0;
  std::uint64_t sequential_accesses = 0;
  std::uint64_t lb_computations = 0;
  double cpu_time = 0.0;
  double input_time = 0.0;
  double output_time = 0.0;

  friend bool operator==(const AccessStats&, const AccessStats&) = default;
};

/// Visitor for index leaves: (leaf lower bound, member ids).
using LeafVisitor = std::function<void(double, std::span<const SeriesId>)>;

struct SearchResult {
  NeighborSet neighbors;
  AccessStats stats;
};

/// Bounded max-heap keeping the k smallest (distance, id) pairs. Ties on
/// distance are resolved toward the smaller id.
class KnnHeap {
 public:
  explicit KnnHeap(std::size_t k);

  bool full() const noexcept { return heap_.size() == k_; }
  std::size_t size() const noexcept { return heap_.size(); }
  std::size_t k() const noexcept { return k_; }

  /// Current pruning threshold: k-th smallest squared distance, +inf until full.
  double threshold() const noexcept;

  /// Inserts when (sq_distance, id) beats the current k-th entry.
  bool offer(SeriesId id, double sq_distance);
  bool contains(SeriesId id) const noexcept;

  NeighborSet sorted() const;

 private:
  std::size_t k_;
  std::vector<Neighbor> heap_;
};

Series z_normalize(std::span<const float> s);
std::vector<float> z_normalize_values(std::span<const float> s);

double squared_euclidean(std::span<const float> a, std::span<const float> b);

/// Indices ordered by descending |query[i]|, stable on ties.
std::vector<std::uint32_t> reorder_indices(std::span<const float> query);

/// Squared distance accumulated in `order`; empty once the partial sum exceeds `threshold`.
std::optional<double> early_abandon_sqdist(std::span<const float> a, std::span<const float> b,
                                           double threshold, std::span<const std::uint32_t> order);

/// Exact k-NN by optimized sequential scan (reordered early abandoning).
SearchResult scan_knn(const Dataset& data, std::span<const float> query, std::size_t k);

// Shared argument checks.
void check_query(const Dataset& data, std::span<const float> query, std::size_t k);

}  // namespace seriescore
