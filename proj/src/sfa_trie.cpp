#include "seriescore/sfa_trie.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "seriescore/storage.hpp"
#include "search_util.hpp"
#include "stopwatch.hpp"

namespace seriescore {

std::size_t SfaTrie::leaf_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

void SfaTrie::fill_mbr(Node& node, std::span<const SeriesId> members) const {
  const std::size_t l = params_.word_length;
  node.mbr.lo.assign(l, std::numeric_limits<double>::infinity());
  node.mbr.hi.assign(l, -std::numeric_limits<double>::infinity());
  for (SeriesId id : members) {
    const auto c = summary(id);
    for (std::size_t d = 0; d < l; ++d) {
      node.mbr.lo[d] = std::min(node.mbr.lo[d], c[d]);
      node.mbr.hi[d] = std::max(node.mbr.hi[d], c[d]);
    }
  }
}

SfaTrie SfaTrie::build(const Dataset& data, const SfaParams& params) {
  if (data.empty()) throw Error(ErrorCode::kEmptySample, "cannot index an empty dataset");
  if (params.leaf_threshold < 1) throw Error(ErrorCode::kConfig, "leaf threshold must be at least 1");
  if (params.alphabet < 2 || params.alphabet > 256) throw Error(ErrorCode::kBadAlphabet, "alphabet must be in 2..256");
  if (params.word_length == 0 || params.word_length % 2 != 0 || params.word_length > data.length()) {
    throw Error(ErrorCode::kBadLength, "word length must be even and at most the series length");
  }
  SfaTrie trie;
  trie.params_ = params;
  trie.data_ = &data;
  const std::size_t count = data.count();
  const std::size_t l = params.word_length;
  trie.weights_ = dft_slot_weights(l, data.length());

  const DftPlan plan(data.length(), l);
  trie.coeffs_.resize(count * l);
  for (std::size_t i = 0; i < count; ++i) {
    plan.apply(data.series(static_cast<SeriesId>(i)), std::span<double>(trie.coeffs_).subspan(i * l, l));
  }
  const std::size_t sample = std::min(count, std::max<std::size_t>(1, params.sample_size));
  trie.bins_ = train_sfa_bins(std::span<const double>(trie.coeffs_).first(sample * l), l, params.alphabet, params.binning);
  trie.symbols_.resize(count * l);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t d = 0; d < l; ++d) {
      trie.symbols_[i * l + d] = static_cast<std::uint8_t>(trie.bins_.region(d, trie.coeffs_[i * l + d]));
    }
  }

  std::vector<std::pair<std::int32_t, std::vector<SeriesId>>> work;
  std::vector<SeriesId> all(count);
  for (std::size_t i = 0; i < count; ++i) all[i] = static_cast<SeriesId>(i);
  trie.nodes_.emplace_back();
  work.emplace_back(0, std::move(all));
  while (!work.empty()) {
    auto [index, members] = std::move(work.back());
    work.pop_back();
    trie.fill_mbr(trie.nodes_[index], members);
    trie.nodes_[index].size = members.size();
    const std::uint32_t depth = trie.nodes_[index].depth;
    if (members.size() <= params.leaf_threshold || depth >= l) {
      trie.nodes_[index].ids = std::move(members);
      continue;
    }
    // Deepen every member's word by one symbol and redistribute.
    std::vector<std::vector<SeriesId>> buckets(params.alphabet);
    for (SeriesId id : members) buckets[trie.symbols_[static_cast<std::size_t>(id) * l + depth]].push_back(id);
    for (std::uint32_t s = 0; s < params.alphabet; ++s) {
      if (buckets[s].empty()) continue;
      Node child;
      child.depth = depth + 1;
      trie.nodes_.push_back(std::move(child));
      const auto ci = static_cast<std::int32_t>(trie.nodes_.size() - 1);
      trie.nodes_[index].children.emplace_back(static_cast<std::uint8_t>(s), ci);
      work.emplace_back(ci, std::move(buckets[s]));
    }
  }
  return trie;
}

std::vector<double> SfaTrie::query_summary(std::span<const float> query) const {
  return dft_summary(query, params_.word_length).coeffs;
}

std::int32_t SfaTrie::descend(std::span<const double> q) const {
  std::int32_t current = 0;
  while (!nodes_[current].is_leaf()) {
    const Node& node = nodes_[current];
    const auto symbol = static_cast<std::uint8_t>(bins_.region(node.depth, q[node.depth]));
    const auto it = std::find_if(node.children.begin(), node.children.end(),
                                 [symbol](const auto& c) { return c.first == symbol; });
    if (it != node.children.end()) {
      current = it->second;
      continue;
    }
    // No child for the query's symbol: take the child with the closest MBR.
    double best = std::numeric_limits<double>::infinity();
    std::int32_t next = node.children.front().second;
    for (const auto& [sym, child] : node.children) {
      const double lb = mbr_mindist_sq(q, weights_, nodes_[child].mbr);
      if (lb < best) {
        best = lb;
        next = child;
      }
    }
    current = next;
  }
  return current;
}

std::int32_t SfaTrie::approximate_leaf(std::span<const float> query) const {
  if (query.size() != data_->length()) throw Error(ErrorCode::kShapeMismatch, "query length differs from data");
  return descend(query_summary(query));
}

SearchResult SfaTrie::approximate_search(std::span<const float> query, std::size_t k) const {
  check_query(*data_, query, k);
  Stopwatch clock;
  KnnHeap heap(k);
  SearchResult result;
  scan_members(*data_, query, reorder_indices(query), nodes_[approximate_leaf(query)].ids, heap, result.stats);
  result.neighbors = heap.sorted();
  result.stats.cpu_time = clock.seconds();
  return result;
}

SearchResult SfaTrie::exact_search(std::span<const float> query, std::size_t k) const {
  check_query(*data_, query, k);
  Stopwatch clock;
  const auto q = query_summary(query);
  const auto order = reorder_indices(query);
  KnnHeap heap(k);
  SearchResult result;
  const std::int32_t seed_leaf = descend(q);
  scan_members(*data_, query, order, nodes_[seed_leaf].ids, heap, result.stats);

  using Entry = std::pair<double, std::int32_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> frontier;
  frontier.emplace(mbr_mindist_sq(q, weights_, nodes_[0].mbr), 0);
  ++result.stats.lb_computations;
  while (!frontier.empty()) {
    const auto [lb, index] = frontier.top();
    if (lb > heap.threshold()) break;
    frontier.pop();
    const Node& node = nodes_[index];
    if (node.is_leaf()) {
      if (index != seed_leaf) scan_members(*data_, query, order, node.ids, heap, result.stats);
      continue;
    }
    for (const auto& [sym, child] : node.children) {
      frontier.emplace(mbr_mindist_sq(q, weights_, nodes_[child].mbr), child);
      ++result.stats.lb_computations;
    }
  }
  result.neighbors = heap.sorted();
  result.stats.cpu_time = clock.seconds();
  return result;
}

void SfaTrie::for_each_leaf(std::span<const float> query, const LeafVisitor& visit) const {
  const auto q = query_summary(query);
  for (const Node& node : nodes_) {
    if (node.is_leaf() && node.size > 0) visit(std::sqrt(mbr_mindist_sq(q, weights_, node.mbr)), node.ids);
  }
}

void SfaTrie::save(BinaryWriter& out) const {
  out.put<std::uint64_t>(params_.leaf_threshold);
  out.put<std::uint64_t>(params_.word_length);
  out.put<std::uint32_t>(params_.alphabet);
  out.put<std::uint8_t>(static_cast<std::uint8_t>(params_.binning));
  out.put<std::uint64_t>(params_.sample_size);
  out.put<std::uint64_t>(bins_.cuts.size());
  for (const auto& c : bins_.cuts) out.put_vector(c);
  out.put_vector(coeffs_);
  out.put_vector(symbols_);
  out.put<std::uint64_t>(nodes_.size());
  for (const Node& n : nodes_) {
    out.put<std::uint32_t>(n.depth);
    out.put<std::uint64_t>(n.children.size());
    for (const auto& [sym, child] : n.children) {
      out.put<std::uint8_t>(sym);
      out.put<std::int32_t>(child);
    }
    out.put_vector(n.mbr.lo);
    out.put_vector(n.mbr.hi);
    out.put<std::uint64_t>(n.size);
    out.put_vector(n.ids);
  }
}

SfaTrie SfaTrie::load(BinaryReader& in, const Dataset& data) {
  SfaTrie trie;
  trie.data_ = &data;
  trie.params_.leaf_threshold = in.get<std::uint64_t>();
  trie.params_.word_length = in.get<std::uint64_t>();
  trie.params_.alphabet = in.get<std::uint32_t>();
  trie.params_.binning = static_cast<Binning>(in.get<std::uint8_t>());
  trie.params_.sample_size = in.get<std::uint64_t>();
  const std::size_t l = trie.params_.word_length;
  const auto dims = in.get<std::uint64_t>();
  if (dims != l || l == 0 || l > data.length()) throw Error(ErrorCode::kCorruptIndex, "SFA bins do not match word length");
  for (std::uint64_t d = 0; d < dims; ++d) trie.bins_.cuts.push_back(in.get_vector<double>());
  trie.weights_ = dft_slot_weights(l, data.length());
  trie.coeffs_ = in.get_vector<double>();
  trie.symbols_ = in.get_vector<std::uint8_t>();
  if (trie.coeffs_.size() != data.count() * l || trie.symbols_.size() != data.count() * l) {
    throw Error(ErrorCode::kCorruptIndex, "SFA summaries do not match the dataset");
  }
  const auto count = in.get<std::uint64_t>();
  trie.nodes_.resize(count);
  for (Node& n : trie.nodes_) {
    n.depth = in.get<std::uint32_t>();
    const auto fanout = in.get<std::uint64_t>();
    if (fanout > trie.params_.alphabet) throw Error(ErrorCode::kCorruptIndex, "SFA fanout exceeds alphabet");
    for (std::uint64_t c = 0; c < fanout; ++c) {
      const auto sym = in.get<std::uint8_t>();
      const auto child = in.get<std::int32_t>();
      if (child <= 0 || static_cast<std::uint64_t>(child) >= count) throw Error(ErrorCode::kCorruptIndex, "SFA child out of range");
      n.children.emplace_back(sym, child);
    }
    n.mbr.lo = in.get_vector<double>();
    n.mbr.hi = in.get_vector<double>();
    n.size = in.get<std::uint64_t>();
    n.ids = in.get_vector<SeriesId>();
    if (n.mbr.lo.size() != l || n.mbr.hi.size() != l || n.depth > l) {
      throw Error(ErrorCode::kCorruptIndex, "SFA node shape mismatch");
    }
    for (SeriesId id : n.ids) {
      if (id >= data.count()) throw Error(ErrorCode::kCorruptIndex, "leaf id out of range");
    }
  }
  if (trie.nodes_.empty()) throw Error(ErrorCode::kCorruptIndex, "empty SFA trie");
  return trie;
}

}  // namespace seriescore
