#include "seriescore/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace seriescore {

double pruning_ratio(std::uint64_t examined, std::uint64_t total) {
  if (total == 0 || examined > total) throw Error(ErrorCode::kBadCounts, "need 0 <= examined <= total, total > 0");
  return 1.0 - static_cast<double>(examined) / static_cast<double>(total);
}

double tlb(std::span<const float> query, double node_lb, const Dataset& data, std::span<const SeriesId> leaf) {
  if (leaf.empty()) throw Error(ErrorCode::kEmptyLeaf, "TLB of an empty leaf");
  double total = 0.0;
  for (SeriesId id : leaf) total += std::sqrt(squared_euclidean(query, data.series(id)));
  const double average = total / static_cast<double>(leaf.size());
  if (average == 0.0) return 1.0;
  return node_lb / average;
}

double effective_error(double d_approx, double d_exact) {
  if (d_exact == 0.0) {
    if (d_approx == 0.0) return 0.0;
    throw Error(ErrorCode::kBadCounts, "effective error undefined for a zero exact distance");
  }
  return (d_approx - d_exact) / d_exact;
}

double extrapolate_10k(std::span<const double> times) {
  constexpr std::size_t kQueries = 100;
  constexpr std::size_t kTrim = 5;
  if (times.size() != kQueries) throw Error(ErrorCode::kBadCardinality, "extrapolation needs exactly 100 query times");
  std::vector<double> sorted(times.begin(), times.end());
  std::sort(sorted.begin(), sorted.end());
  const double kept = std::accumulate(sorted.begin() + kTrim, sorted.end() - kTrim, 0.0);
  return kept / static_cast<double>(kQueries - 2 * kTrim) * 10000.0;
}

void TlbAccumulator::add(double value) { values_.push_back(value); }

TlbSummary TlbAccumulator::summary() const {
  TlbSummary s;
  s.leaves = values_.size();
  s.capped = capped_;
  if (values_.empty()) return s;
  s.mean = std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
  const auto [mn, mx] = std::minmax_element(values_.begin(), values_.end());
  s.min = *mn;
  s.max = *mx;
  return s;
}

}  // namespace seriescore
