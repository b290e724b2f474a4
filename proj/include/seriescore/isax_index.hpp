#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "seriescore/core.hpp"
#include "seriescore/discretize.hpp"

namespace seriescore {

class BinaryWriter;
class BinaryReader;

struct IsaxParams {
  std::size_t leaf_threshold = 1000;
  std::uint32_t alphabet = 256;
  std::size_t segments = 16;
};

/// iSAX2+-style binary-split tree over iSAX words with a flat first level
/// (one child per combination of first bits) and a full-cardinality summary
/// array in file order for skip-sequential exact search.
class IsaxIndex {
 public:
  struct Node {
    IsaxWord word;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t split_segment = 0;
    std::uint64_t size = 0;
    std::vector<SeriesId> ids;  // leaves only

    bool is_leaf() const noexcept { return left < 0; }
  };

  static IsaxIndex build(const Dataset& data, const IsaxParams& params);

  SearchResult approximate_search(std::span<const float> query, std::size_t k) const;
  SearchResult exact_search(std::span<const float> query, std::size_t k) const;
  SearchResult sims_exact_search(std::span<const float> query, std::size_t k) const;

  /// Index of the leaf approximate search would visit.
  std::int32_t approximate_leaf(std::span<const float> query) const;
  void for_each_leaf(std::span<const float> query, const LeafVisitor& visit) const;

  const IsaxParams& params() const noexcept { return params_; }
  const Breakpoints& breakpoints() const noexcept { return breakpoints_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<std::int32_t>& roots() const noexcept { return roots_; }
  /// Full-cardinality symbols, `segments` per series, in id order.
  std::span<const std::uint8_t> summary(SeriesId id) const noexcept {
    return {summaries_.data() + static_cast<std::size_t>(id) * params_.segments, params_.segments};
  }
  const Dataset& data() const noexcept { return *data_; }
  std::size_t leaf_count() const noexcept;

  void save(BinaryWriter& out) const;
  static IsaxIndex load(BinaryReader& in, const Dataset& data);

 private:
  struct QueryContext;

  std::uint8_t full_bits() const noexcept;
  QueryContext prepare(std::span<const float> query) const;
  double node_mindist_sq(const QueryContext& ctx, const Node& node) const;
  void split_recursive(std::int32_t node_index, std::vector<SeriesId> members,
                       const std::vector<double>& paa_values);

  IsaxParams params_;
  const Dataset* data_ = nullptr;
  Breakpoints breakpoints_;
  std::vector<Node> nodes_;
  std::vector<std::int32_t> roots_;  // ordered by first-bit key
  std::vector<std::uint64_t> root_keys_;
  std::vector<std::uint8_t> summaries_;
};

}  // namespace seriescore
