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

struct SfaParams {
  std::size_t leaf_threshold = 1000;
  std::size_t word_length = 16;  // l_max, also the number of DFT values kept
  std::uint32_t alphabet = 8;
  Binning binning = Binning::kEquiDepth;
  std::size_t sample_size = 100000;
};

/// Trie over SFA words with fanout equal to the alphabet size. A node at
/// depth d routes by symbol d; every node keeps the MBR of the DFT summaries
/// below it.
class SfaTrie {
 public:
  struct Node {
    std::uint32_t depth = 0;
    std::vector<std::pair<std::uint8_t, std::int32_t>> children;  // sorted by symbol
    Mbr mbr;
    std::uint64_t size = 0;
    std::vector<SeriesId> ids;

    bool is_leaf() const noexcept { return children.empty(); }
  };

  static SfaTrie build(const Dataset& data, const SfaParams& params);

  SearchResult approximate_search(std::span<const float> query, std::size_t k) const;
  SearchResult exact_search(std::span<const float> query, std::size_t k) const;

  std::int32_t approximate_leaf(std::span<const float> query) const;
  void for_each_leaf(std::span<const float> query, const LeafVisitor& visit) const;

  const SfaParams& params() const noexcept { return params_; }
  const Breakpoints& bins() const noexcept { return bins_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::span<const double> summary(SeriesId id) const noexcept {
    return {coeffs_.data() + static_cast<std::size_t>(id) * params_.word_length, params_.word_length};
  }
  std::size_t leaf_count() const noexcept;
  const Dataset& data() const noexcept { return *data_; }

  void save(BinaryWriter& out) const;
  static SfaTrie load(BinaryReader& in, const Dataset& data);

 private:
  std::vector<double> query_summary(std::span<const float> query) const;
  std::int32_t descend(std::span<const double> q) const;
  void fill_mbr(Node& node, std::span<const SeriesId> members) const;

  SfaParams params_;
  const Dataset* data_ = nullptr;
  Breakpoints bins_;
  std::vector<double> weights_;
  std::vector<double> coeffs_;          // word_length values per series
  std::vector<std::uint8_t> symbols_;   // full-length word per series
  std::vector<Node> nodes_;
};

}  // namespace seriescore
