#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "seriescore/core.hpp"

namespace seriescore {

/// 1 - examined / total.
double pruning_ratio(std::uint64_t examined, std::uint64_t total);

/// Leaf lower bound over the average true distance from the query to the
/// leaf's members. A leaf whose members all equal the query scores 1.
double tlb(std::span<const float> query, double node_lb, const Dataset& data, std::span<const SeriesId> leaf);

/// (d_approx - d_exact) / d_exact, with 0 when both distances are zero.
double effective_error(double d_approx, double d_exact);

/// Drops the 5 fastest and 5 slowest of exactly 100 query times and scales
/// the mean of the remaining 90 to 10,000 queries.
double extrapolate_10k(std::span<const double> times);

struct TlbSummary {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t leaves = 0;
  bool capped = false;
};

/// Accumulates per-leaf TLB values, honouring a cap on the number of leaves
/// considered per query.
class TlbAccumulator {
 public:
  explicit TlbAccumulator(std::size_t leaf_cap = 10000) : leaf_cap_(leaf_cap) {}

  /// Visits one query's leaves through `for_each_leaf`.
  template <typename Index>
  void add_query(const Index& index, std::span<const float> query) {
    std::size_t seen = 0;
    index.for_each_leaf(query, [&](double lb, std::span<const SeriesId> ids) {
      if (seen++ >= leaf_cap_) {
        capped_ = true;
        return;
      }
      add(tlb(query, lb, index.data(), ids));
    });
  }

  void add(double value);
  TlbSummary summary() const;
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  std::size_t leaf_cap_;
  bool capped_ = false;
  std::vector<double> values_;
};

}  // namespace seriescore
