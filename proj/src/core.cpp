#include "seriescore/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "stopwatch.hpp"

namespace seriescore {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kDegenerateSeries: return "DegenerateSeries";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kBadSegmentation: return "BadSegmentation";
    case ErrorCode::kBadLength: return "BadLength";
    case ErrorCode::kBadAlphabet: return "BadAlphabet";
    case ErrorCode::kEmptySample: return "EmptySample";
    case ErrorCode::kBadBudget: return "BadBudget";
    case ErrorCode::kBadCounts: return "BadCounts";
    case ErrorCode::kEmptyLeaf: return "EmptyLeaf";
    case ErrorCode::kBadCardinality: return "BadCardinality";
    case ErrorCode::kInsufficientQueries: return "InsufficientQueries";
    case ErrorCode::kSizeMismatch: return "SizeMismatch";
    case ErrorCode::kBadFloat: return "BadFloat";
    case ErrorCode::kBadBuffer: return "BadBuffer";
    case ErrorCode::kCorruptIndex: return "CorruptIndex";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kConfig: return "Config";
  }
  return "Unknown";
}

namespace {

void check_finite(std::span<const float> values) {
  for (float v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "series contains NaN or Inf");
  }
}

}  // namespace

Series::Series(std::vector<float> values) : values_(std::move(values)) {
  if (values_.empty()) throw Error(ErrorCode::kBadLength, "series must have at least one point");
  check_finite(values_);
}

Dataset::Dataset(std::size_t length, std::vector<float> values)
    : length_(length), values_(std::move(values)) {
  if (length_ == 0) throw Error(ErrorCode::kBadLength, "series length must be positive");
  if (values_.size() % length_ != 0) {
    throw Error(ErrorCode::kSizeMismatch, "value count is not a multiple of the series length");
  }
  check_finite(values_);
}

void Dataset::append(std::span<const float> series) {
  if (length_ == 0) {
    if (series.empty()) throw Error(ErrorCode::kBadLength, "series length must be positive");
    length_ = series.size();
  }
  if (series.size() != length_) throw Error(ErrorCode::kLengthMismatch, "appended series has wrong length");
  check_finite(series);
  values_.insert(values_.end(), series.begin(), series.end());
}

KnnHeap::KnnHeap(std::size_t k) : k_(k) {
  if (k == 0) throw Error(ErrorCode::kConfig, "k must be positive");
  heap_.reserve(k);
}

namespace {

bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.sq_distance < b.sq_distance || (a.sq_distance == b.sq_distance && a.id < b.id);
}

}  // namespace

double KnnHeap::threshold() const noexcept {
  return full() ? heap_.front().sq_distance : std::numeric_limits<double>::infinity();
}

bool KnnHeap::offer(SeriesId id, double sq_distance) {
  const Neighbor candidate{id, sq_distance};
  if (heap_.size() < k_) {
    if (contains(id)) return false;
    heap_.push_back(candidate);
    std::push_heap(heap_.begin(), heap_.end(), neighbor_less);
    return true;
  }
  if (!neighbor_less(candidate, heap_.front()) || contains(id)) return false;
  std::pop_heap(heap_.begin(), heap_.end(), neighbor_less);
  heap_.back() = candidate;
  std::push_heap(heap_.begin(), heap_.end(), neighbor_less);
  return true;
}

bool KnnHeap::contains(SeriesId id) const noexcept {
  return std::any_of(heap_.begin(), heap_.end(), [id](const Neighbor& n) { return n.id == id; });
}

NeighborSet KnnHeap::sorted() const {
  NeighborSet out = heap_;
  std::sort(out.begin(), out.end(), neighbor_less);
  return out;
}

std::vector<float> z_normalize_values(std::span<const float> s) {
  constexpr double kDegeneracyTolerance = 1e-12;
  if (s.size() < 2) throw Error(ErrorCode::kDegenerateSeries, "need at least two points to normalize");
  check_finite(s);
  const double n = static_cast<double>(s.size());
  double mean = 0.0;
  for (float v : s) mean += v;
  mean /= n;
  double var = 0.0;
  for (float v : s) var += (v - mean) * (v - mean);
  const double stddev = std::sqrt(var / n);
  if (stddev <= kDegeneracyTolerance) {
    throw Error(ErrorCode::kDegenerateSeries, "standard deviation is zero");
  }
  std::vector<float> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = static_cast<float>((s[i] - mean) / stddev);
  return out;
}

Series z_normalize(std::span<const float> s) { return Series(z_normalize_values(s)); }

double squared_euclidean(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kLengthMismatch, "series lengths differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum;
}

std::vector<std::uint32_t> reorder_indices(std::span<const float> query) {
  std::vector<std::uint32_t> order(query.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t x, std::uint32_t y) {
    return std::fabs(query[x]) > std::fabs(query[y]);
  });
  return order;
}

std::optional<double> early_abandon_sqdist(std::span<const float> a, std::span<const float> b,
                                           double threshold, std::span<const std::uint32_t> order) {
  if (a.size() != b.size() || order.size() != a.size()) {
    throw Error(ErrorCode::kLengthMismatch, "series lengths differ");
  }
  double sum = 0.0;
  for (std::uint32_t i : order) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
    if (sum > threshold) return std::nullopt;
  }
  return sum;
}

void check_query(const Dataset& data, std::span<const float> query, std::size_t k) {
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "dataset is empty");
  if (query.size() != data.length()) throw Error(ErrorCode::kLengthMismatch, "query length differs from data");
  if (k == 0 || k > data.count()) throw Error(ErrorCode::kConfig, "k must be in 1..count");
}

SearchResult scan_knn(const Dataset& data, std::span<const float> query, std::size_t k) {
  check_query(data, query, k);
  Stopwatch clock;
  const auto order = reorder_indices(query);
  KnnHeap heap(k);
  SearchResult result;
  const auto count = static_cast<SeriesId>(data.count());
  for (SeriesId id = 0; id < count; ++id) {
    if (auto d = early_abandon_sqdist(query, data.series(id), heap.threshold(), order)) {
      heap.offer(id, *d);
    }
  }
  result.neighbors = heap.sorted();
  result.stats.series_examined = count;
  result.stats.sequential_accesses = count;
  result.stats.cpu_time = clock.seconds();
  return result;
}

}  // namespace seriescore
