#pragma once

#include <cstdint>
#include <span>

#include "seriescore/core.hpp"

namespace seriescore {

// One leaf visit: a single random access followed by a contiguous read of
// every member, refined with early abandoning against the heap threshold.
inline void scan_members(const Dataset& data, std::span<const float> query, std::span<const std::uint32_t> order,
                         std::span<const SeriesId> ids, KnnHeap& heap, AccessStats& stats) {
  ++stats.random_accesses;
  stats.sequential_accesses += ids.size();
  stats.series_examined += ids.size();
  for (SeriesId id : ids) {
    if (auto d = early_abandon_sqdist(query, data.series(id), heap.threshold(), order)) heap.offer(id, *d);
  }
}

// Accounting for a skip-sequential pass in file order: each maximal run of
// skipped series is one random access, each read series one sequential block.
class SkipSequentialCursor {
 public:
  explicit SkipSequentialCursor(AccessStats& stats) : stats_(stats) {}

  void skip() {
    if (!in_skip_) ++stats_.random_accesses;
    in_skip_ = true;
  }

  void read() {
    in_skip_ = false;
    ++stats_.series_examined;
    ++stats_.sequential_accesses;
  }

 private:
  AccessStats& stats_;
  bool in_skip_ = false;
};

}  // namespace seriescore
