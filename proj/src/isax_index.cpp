#include "seriescore/isax_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <queue>

#include "seriescore/storage.hpp"
#include "search_util.hpp"
#include "stopwatch.hpp"

namespace seriescore {

struct IsaxIndex::QueryContext {
  std::vector<double> paa;
  std::vector<std::uint8_t> symbols;
  std::vector<std::uint32_t> order;
};

std::uint8_t IsaxIndex::full_bits() const noexcept {
  return static_cast<std::uint8_t>(std::countr_zero(params_.alphabet));
}

std::size_t IsaxIndex::leaf_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

IsaxIndex IsaxIndex::build(const Dataset& data, const IsaxParams& params) {
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "cannot index an empty dataset");
  if (params.leaf_threshold < 1) throw Error(ErrorCode::kConfig, "leaf threshold must be at least 1");
  if (params.alphabet < 2 || params.alphabet > 256 || !std::has_single_bit(params.alphabet)) {
    throw Error(ErrorCode::kBadAlphabet, "alphabet must be a power of two in 2..256");
  }
  if (params.segments == 0 || params.segments > 64 || data.length() % params.segments != 0) {
    throw Error(ErrorCode::kBadSegmentation, "segments must divide the series length and be at most 64");
  }
  IsaxIndex index;
  index.params_ = params;
  index.data_ = &data;
  index.breakpoints_ = gaussian_breakpoints(params.alphabet);

  const std::size_t count = data.count();
  const std::size_t l = params.segments;
  const std::uint8_t full = index.full_bits();
  std::vector<double> paa_values(count * l);
  index.summaries_.resize(count * l);
  for (std::size_t i = 0; i < count; ++i) {
    const auto p = paa(data.series(static_cast<SeriesId>(i)), l);
    for (std::size_t j = 0; j < l; ++j) {
      paa_values[i * l + j] = p.means[j];
      index.summaries_[i * l + j] = static_cast<std::uint8_t>(index.breakpoints_.region(0, p.means[j]));
    }
  }

  if (count <= params.leaf_threshold) {
    // The logical root never overflowed: one zero-bit leaf holds everything.
    Node root;
    root.word.bits.assign(l, 0);
    root.word.symbols.assign(l, 0);
    root.size = count;
    root.ids.resize(count);
    for (std::size_t i = 0; i < count; ++i) root.ids[i] = static_cast<SeriesId>(i);
    index.nodes_.push_back(std::move(root));
    index.roots_.push_back(0);
    return index;
  }
  std::map<std::uint64_t, std::vector<SeriesId>> groups;
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t key = 0;
    for (std::size_t j = 0; j < l; ++j) {
      key |= static_cast<std::uint64_t>(index.summaries_[i * l + j] >> (full - 1)) << j;
    }
    groups[key].push_back(static_cast<SeriesId>(i));
  }
  for (auto& [key, members] : groups) {
    Node root;
    root.word.bits.assign(l, 1);
    root.word.symbols.resize(l);
    for (std::size_t j = 0; j < l; ++j) root.word.symbols[j] = static_cast<std::uint8_t>((key >> j) & 1u);
    index.nodes_.push_back(std::move(root));
    const auto root_index = static_cast<std::int32_t>(index.nodes_.size() - 1);
    index.roots_.push_back(root_index);
    index.root_keys_.push_back(key);
    index.split_recursive(root_index, std::move(members), paa_values);
  }
  return index;
}

void IsaxIndex::split_recursive(std::int32_t node_index, std::vector<SeriesId> members,
                                const std::vector<double>& paa_values) {
  const std::size_t l = params_.segments;
  const std::uint8_t full = full_bits();
  nodes_[node_index].size = members.size();
  if (members.size() <= params_.leaf_threshold) {
    nodes_[node_index].ids = std::move(members);
    return;
  }
  // Split on the segment with the largest PAA variance among members that
  // still has bits left; lowest index wins ties.
  std::size_t best = l;
  double best_var = -1.0;
  for (std::size_t j = 0; j < l; ++j) {
    if (nodes_[node_index].word.bits[j] >= full) continue;
    double mean = 0.0;
    for (SeriesId id : members) mean += paa_values[id * l + j];
    mean /= static_cast<double>(members.size());
    double var = 0.0;
    for (SeriesId id : members) var += (paa_values[id * l + j] - mean) * (paa_values[id * l + j] - mean);
    if (var > best_var) {
      best_var = var;
      best = j;
    }
  }
  if (best == l) {
    // Every segment is at full cardinality: the leaf overflows.
    nodes_[node_index].ids = std::move(members);
    return;
  }
  const std::uint8_t child_bits = static_cast<std::uint8_t>(nodes_[node_index].word.bits[best] + 1);
  std::vector<SeriesId> zeros, ones;
  for (SeriesId id : members) {
    const auto bit = (summaries_[id * l + best] >> (full - child_bits)) & 1u;
    (bit ? ones : zeros).push_back(id);
  }
  members.clear();
  members.shrink_to_fit();

  Node left, right;
  left.word = right.word = nodes_[node_index].word;
  left.word.bits[best] = right.word.bits[best] = child_bits;
  left.word.symbols[best] = static_cast<std::uint8_t>(nodes_[node_index].word.symbols[best] << 1);
  right.word.symbols[best] = static_cast<std::uint8_t>(left.word.symbols[best] | 1u);
  nodes_.push_back(std::move(left));
  const auto left_index = static_cast<std::int32_t>(nodes_.size() - 1);
  nodes_.push_back(std::move(right));
  const auto right_index = static_cast<std::int32_t>(nodes_.size() - 1);
  nodes_[node_index].left = left_index;
  nodes_[node_index].right = right_index;
  nodes_[node_index].split_segment = static_cast<std::uint32_t>(best);
  split_recursive(left_index, std::move(zeros), paa_values);
  split_recursive(right_index, std::move(ones), paa_values);
}

IsaxIndex::QueryContext IsaxIndex::prepare(std::span<const float> query) const {
  QueryContext ctx;
  ctx.paa = paa(query, params_.segments).means;
  ctx.symbols.resize(params_.segments);
  for (std::size_t j = 0; j < params_.segments; ++j) {
    ctx.symbols[j] = static_cast<std::uint8_t>(breakpoints_.region(0, ctx.paa[j]));
  }
  ctx.order = reorder_indices(query);
  return ctx;
}

double IsaxIndex::node_mindist_sq(const QueryContext& ctx, const Node& node) const {
  return sax_mindist_sq(ctx.paa, data_->length(), node.word.symbols, node.word.bits, breakpoints_);
}

std::int32_t IsaxIndex::approximate_leaf(std::span<const float> query) const {
  const auto ctx = prepare(query);
  const std::uint8_t full = full_bits();
  std::uint64_t key = 0;
  for (std::size_t j = 0; j < params_.segments; ++j) key |= static_cast<std::uint64_t>(ctx.symbols[j] >> (full - 1)) << j;
  if (root_keys_.empty()) return roots_.front();
  std::int32_t current = -1;
  const auto it = std::lower_bound(root_keys_.begin(), root_keys_.end(), key);
  if (it != root_keys_.end() && *it == key) {
    current = roots_[static_cast<std::size_t>(it - root_keys_.begin())];
  } else {
    double best = std::numeric_limits<double>::infinity();
    for (std::int32_t r : roots_) {
      const double lb = node_mindist_sq(ctx, nodes_[r]);
      if (lb < best) {
        best = lb;
        current = r;
      }
    }
  }
  while (!nodes_[current].is_leaf()) {
    const Node& node = nodes_[current];
    const std::size_t seg = node.split_segment;
    const std::uint8_t child_bits = nodes_[node.left].word.bits[seg];
    const bool bit = (ctx.symbols[seg] >> (full - child_bits)) & 1u;
    std::int32_t next = bit ? node.right : node.left;
    if (nodes_[next].size == 0) next = bit ? node.left : node.right;
    current = next;
  }
  return current;
}

SearchResult IsaxIndex::approximate_search(std::span<const float> query, std::size_t k) const {
  check_query(*data_, query, k);
  Stopwatch clock;
  const auto order = reorder_indices(query);
  KnnHeap heap(k);
  SearchResult result;
  scan_members(*data_, query, order, nodes_[approximate_leaf(query)].ids, heap, result.stats);
  result.neighbors = heap.sorted();
  result.stats.cpu_time = clock.seconds();
  return result;
}

SearchResult IsaxIndex::exact_search(std::span<const float> query, std::size_t k) const {
  check_query(*data_, query, k);
  Stopwatch clock;
  const auto ctx = prepare(query);
  KnnHeap heap(k);
  SearchResult result;
  const std::int32_t seed_leaf = approximate_leaf(query);
  scan_members(*data_, query, ctx.order, nodes_[seed_leaf].ids, heap, result.stats);

  using Entry = std::pair<double, std::int32_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> frontier;
  for (std::int32_t r : roots_) {
    frontier.emplace(node_mindist_sq(ctx, nodes_[r]), r);
    ++result.stats.lb_computations;
  }
  while (!frontier.empty()) {
    const auto [lb, index] = frontier.top();
    if (lb > heap.threshold()) break;
    frontier.pop();
    const Node& node = nodes_[index];
    if (node.is_leaf()) {
      if (index != seed_leaf && node.size > 0) {
        scan_members(*data_, query, ctx.order, node.ids, heap, result.stats);
      }
      continue;
    }
    for (std::int32_t child : {node.left, node.right}) {
      if (nodes_[child].size == 0) continue;
      frontier.emplace(node_mindist_sq(ctx, nodes_[child]), child);
      ++result.stats.lb_computations;
    }
  }
  result.neighbors = heap.sorted();
  result.stats.cpu_time = clock.seconds();
  return result;
}

SearchResult IsaxIndex::sims_exact_search(std::span<const float> query, std::size_t k) const {
  check_query(*data_, query, k);
  Stopwatch clock;
  const auto ctx = prepare(query);
  KnnHeap heap(k);
  SearchResult seed;
  scan_members(*data_, query, ctx.order, nodes_[approximate_leaf(query)].ids, heap, seed.stats);

  // Per-segment squared gap of the query PAA to every full-cardinality region.
  const std::size_t l = params_.segments;
  const std::size_t a = params_.alphabet;
  const double scale = static_cast<double>(data_->length()) / static_cast<double>(l);
  std::vector<double> table(l * a);
  const std::uint8_t full = full_bits();
  for (std::size_t j = 0; j < l; ++j) {
    for (std::size_t s = 0; s < a; ++s) {
      const auto [lo, hi] = isax_region(breakpoints_, static_cast<std::uint8_t>(s), full);
      const double v = ctx.paa[j];
      const double g = v < lo ? lo - v : (v > hi ? v - hi : 0.0);
      table[j * a + s] = scale * g * g;
    }
  }

  SearchResult result;
  result.stats.random_accesses = seed.stats.random_accesses;
  result.stats.sequential_accesses = seed.stats.sequential_accesses;
  SkipSequentialCursor cursor(result.stats);
  const auto count = static_cast<SeriesId>(data_->count());
  for (SeriesId id = 0; id < count; ++id) {
    const std::uint8_t* word = summaries_.data() + static_cast<std::size_t>(id) * l;
    double lb = 0.0;
    for (std::size_t j = 0; j < l; ++j) lb += table[j * a + word[j]];
    ++result.stats.lb_computations;
    if (lb > heap.threshold()) {
      cursor.skip();
      continue;
    }
    cursor.read();
    if (auto d = early_abandon_sqdist(query, data_->series(id), heap.threshold(), ctx.order)) heap.offer(id, *d);
  }
  result.neighbors = heap.sorted();
  result.stats.cpu_time = clock.seconds();
  return result;
}

void IsaxIndex::for_each_leaf(std::span<const float> query, const LeafVisitor& visit) const {
  const auto ctx = prepare(query);
  for (const Node& node : nodes_) {
    if (!node.is_leaf() || node.size == 0) continue;
    visit(std::sqrt(node_mindist_sq(ctx, node)), node.ids);
  }
}

void IsaxIndex::save(BinaryWriter& out) const {
  out.put<std::uint64_t>(params_.leaf_threshold);
  out.put<std::uint32_t>(params_.alphabet);
  out.put<std::uint64_t>(params_.segments);
  out.put_vector(breakpoints_.cuts.front());
  out.put<std::uint64_t>(nodes_.size());
  for (const Node& n : nodes_) {
    out.put_vector(n.word.symbols);
    out.put_vector(n.word.bits);
    out.put<std::int32_t>(n.left);
    out.put<std::int32_t>(n.right);
    out.put<std::uint32_t>(n.split_segment);
    out.put<std::uint64_t>(n.size);
    out.put_vector(n.ids);
  }
  out.put_vector(roots_);
  out.put_vector(root_keys_);
  out.put_vector(summaries_);
}

IsaxIndex IsaxIndex::load(BinaryReader& in, const Dataset& data) {
  IsaxIndex index;
  index.data_ = &data;
  index.params_.leaf_threshold = in.get<std::uint64_t>();
  index.params_.alphabet = in.get<std::uint32_t>();
  index.params_.segments = in.get<std::uint64_t>();
  index.breakpoints_.cuts.push_back(in.get_vector<double>());
  const auto node_count = in.get<std::uint64_t>();
  index.nodes_.resize(node_count);
  for (Node& n : index.nodes_) {
    n.word.symbols = in.get_vector<std::uint8_t>();
    n.word.bits = in.get_vector<std::uint8_t>();
    n.left = in.get<std::int32_t>();
    n.right = in.get<std::int32_t>();
    n.split_segment = in.get<std::uint32_t>();
    n.size = in.get<std::uint64_t>();
    n.ids = in.get_vector<SeriesId>();
  }
  index.roots_ = in.get_vector<std::int32_t>();
  index.root_keys_ = in.get_vector<std::uint64_t>();
  index.summaries_ = in.get_vector<std::uint8_t>();
  if (index.summaries_.size() != data.count() * index.params_.segments ||
      index.breakpoints_.cuts.front().size() + 1 != index.params_.alphabet) {
    throw Error(ErrorCode::kCorruptIndex, "iSAX index does not match the dataset");
  }
  for (const Node& n : index.nodes_) {
    if ((n.left >= 0 && static_cast<std::uint64_t>(n.left) >= node_count) ||
        (n.right >= 0 && static_cast<std::uint64_t>(n.right) >= node_count)) {
      throw Error(ErrorCode::kCorruptIndex, "node child out of range");
    }
    for (SeriesId id : n.ids) {
      if (id >= data.count()) throw Error(ErrorCode::kCorruptIndex, "leaf id out of range");
    }
  }
  return index;
}

}  // namespace seriescore
