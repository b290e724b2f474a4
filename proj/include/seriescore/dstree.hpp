#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "seriescore/core.hpp"

namespace seriescore {

class BinaryWriter;
class BinaryReader;

struct DsTreeParams {
  std::size_t leaf_threshold = 1000;
  std::size_t initial_segments = 4;
};

/// Per-segment bounds over the series below a node.
struct SegmentSynopsis {
  double min_mean = 0.0;
  double max_mean = 0.0;
  double min_std = 0.0;
  double max_std = 0.0;

  friend bool operator==(const SegmentSynopsis&, const SegmentSynopsis&) = default;
};

/// Prefix sums of one query for O(1) per-segment mean/stddev.
class SegmentStats {
 public:
  explicit SegmentStats(std::span<const float> s);

  double mean(std::size_t begin, std::size_t end) const noexcept;
  double stddev(std::size_t begin, std::size_t end) const noexcept;

 private:
  std::vector<double> sum_;
  std::vector<double> sum_sq_;
};

/// Binary tree over EAPCA synopses; splits refine a node either horizontally
/// (by a segment mean) or vertically (by halving a segment first).
class DsTree {
 public:
  struct Node {
    std::vector<std::uint32_t> ends;  // exclusive segment ends
    std::vector<SegmentSynopsis> synopsis;
    std::int32_t left = -1;
    std::int32_t right = -1;
    // Routing: a series goes left when its mean over the children's segment
    // `split_segment` is below `split_value`.
    std::uint32_t split_segment = 0;
    double split_value = 0.0;
    bool vertical = false;
    std::uint64_t size = 0;
    std::vector<SeriesId> ids;

    bool is_leaf() const noexcept { return left < 0; }
  };

  static DsTree build(const Dataset& data, const DsTreeParams& params);

  SearchResult approximate_search(std::span<const float> query, std::size_t k) const;
  SearchResult exact_search(std::span<const float> query, std::size_t k) const;

  std::int32_t approximate_leaf(std::span<const float> query) const;
  void for_each_leaf(std::span<const float> query, const LeafVisitor& visit) const;

  double node_lower_bound(std::span<const float> query, const Node& node) const;
  double node_upper_bound(std::span<const float> query, const Node& node) const;

  const DsTreeParams& params() const noexcept { return params_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t leaf_count() const noexcept;
  const Dataset& data() const noexcept { return *data_; }

  void save(BinaryWriter& out) const;
  static DsTree load(BinaryReader& in, const Dataset& data);

 private:
  double lower_bound_sq(const SegmentStats& q, const Node& node) const;
  double upper_bound_sq(const SegmentStats& q, const Node& node) const;
  std::int32_t descend(std::span<const float> query) const;
  void split(std::int32_t node_index, std::vector<SeriesId> members);

  DsTreeParams params_;
  const Dataset* data_ = nullptr;
  std::vector<Node> nodes_;
};

}  // namespace seriescore
