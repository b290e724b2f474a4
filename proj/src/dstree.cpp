#include "seriescore/dstree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "seriescore/storage.hpp"
#include "search_util.hpp"
#include "stopwatch.hpp"

namespace seriescore {

SegmentStats::SegmentStats(std::span<const float> s) : sum_(s.size() + 1, 0.0), sum_sq_(s.size() + 1, 0.0) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    sum_[i + 1] = sum_[i] + s[i];
    sum_sq_[i + 1] = sum_sq_[i] + static_cast<double>(s[i]) * s[i];
  }
}

double SegmentStats::mean(std::size_t begin, std::size_t end) const noexcept {
  return (sum_[end] - sum_[begin]) / static_cast<double>(end - begin);
}

double SegmentStats::stddev(std::size_t begin, std::size_t end) const noexcept {
  const double len = static_cast<double>(end - begin);
  const double m = mean(begin, end);
  return std::sqrt(std::max(0.0, (sum_sq_[end] - sum_sq_[begin]) / len - m * m));
}

namespace {

struct SegStat {
  double mean;
  double stddev;
};

// Exact two-pass statistics of one series segment.
SegStat segment_stat(std::span<const float> s, std::size_t begin, std::size_t end) {
  const double len = static_cast<double>(end - begin);
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) sum += s[i];
  const double mean = sum / len;
  double var = 0.0;
  for (std::size_t i = begin; i < end; ++i) var += (s[i] - mean) * (s[i] - mean);
  return {mean, std::sqrt(var / len)};
}

std::size_t segment_begin(const std::vector<std::uint32_t>& ends, std::size_t j) { return j == 0 ? 0 : ends[j - 1]; }

// Range of member means over the columns; `cols` is row-major (member, column).
double range_cost(const std::vector<double>& cols, std::size_t width, std::span<const double> lens,
                  std::span<const std::size_t> rows) {
  double cost = 0.0;
  for (std::size_t c = 0; c < width; ++c) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t r : rows) {
      lo = std::min(lo, cols[r * width + c]);
      hi = std::max(hi, cols[r * width + c]);
    }
    cost += lens[c] * (hi - lo) * (hi - lo);
  }
  return cost;
}

struct SplitChoice {
  double gain = -std::numeric_limits<double>::infinity();
  bool valid = false;
  bool vertical = false;
  std::size_t segment = 0;   // coarse segment index in the parent
  std::size_t half = 0;      // which half becomes the routing segment (vertical only)
  double value = 0.0;
};

}  // namespace

std::size_t DsTree::leaf_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

DsTree DsTree::build(const Dataset& data, const DsTreeParams& params) {
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "cannot index an empty dataset");
  if (params.leaf_threshold < 1) throw Error(ErrorCode::kConfig, "leaf threshold must be at least 1");
  const std::size_t n = data.length();
  if (params.initial_segments == 0 || n % params.initial_segments != 0) {
    throw Error(ErrorCode::kBadSegmentation, "initial segments must divide the series length");
  }
  DsTree tree;
  tree.params_ = params;
  tree.data_ = &data;
  Node root;
  for (std::size_t j = 1; j <= params.initial_segments; ++j) {
    root.ends.push_back(static_cast<std::uint32_t>(j * n / params.initial_segments));
  }
  tree.nodes_.push_back(std::move(root));
  std::vector<SeriesId> all(data.count());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<SeriesId>(i);
  tree.split(0, std::move(all));
  return tree;
}

void DsTree::split(std::int32_t root_index, std::vector<SeriesId> root_members) {
  std::vector<std::pair<std::int32_t, std::vector<SeriesId>>> work;
  work.emplace_back(root_index, std::move(root_members));
  while (!work.empty()) {
    auto [index, members] = std::move(work.back());
    work.pop_back();
    const auto ends = nodes_[index].ends;
    const std::size_t segs = ends.size();
    const std::size_t m = members.size();

    // Fine pieces: every segment of length >= 2 is halved.
    std::vector<std::size_t> piece_begin, piece_end, first_piece(segs), piece_count(segs);
    for (std::size_t j = 0; j < segs; ++j) {
      const std::size_t b = segment_begin(ends, j), e = ends[j];
      first_piece[j] = piece_begin.size();
      if (e - b >= 2) {
        const std::size_t mid = b + (e - b) / 2;
        piece_begin.insert(piece_begin.end(), {b, mid});
        piece_end.insert(piece_end.end(), {mid, e});
        piece_count[j] = 2;
      } else {
        piece_begin.push_back(b);
        piece_end.push_back(e);
        piece_count[j] = 1;
      }
    }
    const std::size_t pieces = piece_begin.size();
    std::vector<double> coarse_mean(m * segs), piece_mean(m * pieces);

    Node& node = nodes_[index];
    node.size = m;
    node.synopsis.assign(segs, {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                                std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()});
    for (std::size_t r = 0; r < m; ++r) {
      const auto s = data_->series(members[r]);
      for (std::size_t j = 0; j < segs; ++j) {
        const auto st = segment_stat(s, segment_begin(ends, j), ends[j]);
        coarse_mean[r * segs + j] = st.mean;
        auto& syn = node.synopsis[j];
        syn.min_mean = std::min(syn.min_mean, st.mean);
        syn.max_mean = std::max(syn.max_mean, st.mean);
        syn.min_std = std::min(syn.min_std, st.stddev);
        syn.max_std = std::max(syn.max_std, st.stddev);
      }
      for (std::size_t p = 0; p < pieces; ++p) piece_mean[r * pieces + p] = segment_stat(s, piece_begin[p], piece_end[p]).mean;
    }
    if (m <= params_.leaf_threshold) {
      node.ids = std::move(members);
      continue;
    }

    std::vector<std::size_t> all_rows(m);
    for (std::size_t r = 0; r < m; ++r) all_rows[r] = r;
    std::vector<double> coarse_lens(segs);
    for (std::size_t j = 0; j < segs; ++j) coarse_lens[j] = static_cast<double>(ends[j] - segment_begin(ends, j));
    const double parent_cost = range_cost(coarse_mean, segs, coarse_lens, all_rows);

    SplitChoice best;
    std::vector<std::size_t> left_rows, right_rows;
    auto partition = [&](const std::vector<double>& cols, std::size_t width, std::size_t col, double value) {
      left_rows.clear();
      right_rows.clear();
      for (std::size_t r = 0; r < m; ++r) (cols[r * width + col] < value ? left_rows : right_rows).push_back(r);
      return !left_rows.empty() && !right_rows.empty();
    };
    auto midpoint = [&](const std::vector<double>& cols, std::size_t width, std::size_t col) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t r = 0; r < m; ++r) {
        lo = std::min(lo, cols[r * width + col]);
        hi = std::max(hi, cols[r * width + col]);
      }
      return 0.5 * (lo + hi);
    };

    for (std::size_t j = 0; j < segs; ++j) {
      const double value = midpoint(coarse_mean, segs, j);
      if (!partition(coarse_mean, segs, j, value)) continue;
      const double gain = 2.0 * parent_cost - range_cost(coarse_mean, segs, coarse_lens, left_rows) -
                          range_cost(coarse_mean, segs, coarse_lens, right_rows);
      if (gain > best.gain) best = {gain, true, false, j, 0, value};
    }

    // Vertical candidates: the parent segmentation with segment j halved.
    for (std::size_t j = 0; j < segs; ++j) {
      if (piece_count[j] != 2) continue;
      const std::size_t width = segs + 1;
      std::vector<double> refined(m * width);
      std::vector<double> lens(width);
      for (std::size_t c = 0, src = 0; src < segs; ++src) {
        if (src == j) {
          for (std::size_t h = 0; h < 2; ++h, ++c) {
            const std::size_t p = first_piece[j] + h;
            lens[c] = static_cast<double>(piece_end[p] - piece_begin[p]);
            for (std::size_t r = 0; r < m; ++r) refined[r * width + c] = piece_mean[r * pieces + p];
          }
        } else {
          lens[c] = coarse_lens[src];
          for (std::size_t r = 0; r < m; ++r) refined[r * width + c] = coarse_mean[r * segs + src];
          ++c;
        }
      }
      const double refined_parent = range_cost(refined, width, lens, all_rows);
      for (std::size_t h = 0; h < 2; ++h) {
        const double value = midpoint(refined, width, j + h);
        if (!partition(refined, width, j + h, value)) continue;
        const double gain = 2.0 * refined_parent - range_cost(refined, width, lens, left_rows) -
                            range_cost(refined, width, lens, right_rows);
        if (gain > best.gain) best = {gain, true, true, j, h, value};
      }
    }

    if (!best.valid) {
      // All members share every segment mean: nothing separates them.
      node.ids = std::move(members);
      continue;
    }

    std::vector<std::uint32_t> child_ends = ends;
    std::size_t route_segment = best.segment;
    if (best.vertical) {
      const std::size_t p = first_piece[best.segment];
      child_ends.insert(child_ends.begin() + static_cast<std::ptrdiff_t>(best.segment),
                        static_cast<std::uint32_t>(piece_end[p]));
      route_segment = best.segment + best.half;
    }
    const std::size_t rb = segment_begin(child_ends, route_segment), re = child_ends[route_segment];
    std::vector<SeriesId> left_ids, right_ids;
    for (SeriesId id : members) {
      (segment_stat(data_->series(id), rb, re).mean < best.value ? left_ids : right_ids).push_back(id);
    }
    node.split_segment = static_cast<std::uint32_t>(route_segment);
    node.split_value = best.value;
    node.vertical = best.vertical;

    Node left, right;
    left.ends = right.ends = child_ends;
    nodes_.push_back(std::move(left));
    nodes_.push_back(std::move(right));
    const auto li = static_cast<std::int32_t>(nodes_.size() - 2);
    nodes_[index].left = li;
    nodes_[index].right = li + 1;
    work.emplace_back(li + 1, std::move(right_ids));
    work.emplace_back(li, std::move(left_ids));
  }
}

double DsTree::lower_bound_sq(const SegmentStats& q, const Node& node) const {
  double sum = 0.0;
  for (std::size_t j = 0; j < node.ends.size(); ++j) {
    const std::size_t b = segment_begin(node.ends, j), e = node.ends[j];
    const double mq = q.mean(b, e);
    const auto& syn = node.synopsis[j];
    const double g = mq < syn.min_mean ? syn.min_mean - mq : (mq > syn.max_mean ? mq - syn.max_mean : 0.0);
    sum += static_cast<double>(e - b) * g * g;
  }
  return sum;
}

double DsTree::upper_bound_sq(const SegmentStats& q, const Node& node) const {
  double sum = 0.0;
  for (std::size_t j = 0; j < node.ends.size(); ++j) {
    const std::size_t b = segment_begin(node.ends, j), e = node.ends[j];
    const double mq = q.mean(b, e);
    const auto& syn = node.synopsis[j];
    const double t = std::max(std::fabs(mq - syn.min_mean), std::fabs(mq - syn.max_mean)) + syn.max_std + q.stddev(b, e);
    sum += static_cast<double>(e - b) * t * t;
  }
  return sum;
}

double DsTree::node_lower_bound(std::span<const float> query, const Node& node) const {
  if (query.size() != data_->length()) throw Error(ErrorCode::kShapeMismatch, "query length differs from data");
  return std::sqrt(lower_bound_sq(SegmentStats(query), node));
}

double DsTree::node_upper_bound(std::span<const float> query, const Node& node) const {
  if (query.size() != data_->length()) throw Error(ErrorCode::kShapeMismatch, "query length differs from data");
  return std::sqrt(upper_bound_sq(SegmentStats(query), node));
}

// Routing recomputes segment means exactly as the build did, so a stored
// series always lands in its own leaf.
std::int32_t DsTree::descend(std::span<const float> query) const {
  std::int32_t current = 0;
  while (!nodes_[current].is_leaf()) {
    const Node& node = nodes_[current];
    const auto& ends = nodes_[node.left].ends;
    const double mq = segment_stat(query, segment_begin(ends, node.split_segment), ends[node.split_segment]).mean;
    current = mq < node.split_value ? node.left : node.right;
  }
  return current;
}

std::int32_t DsTree::approximate_leaf(std::span<const float> query) const {
  if (query.size() != data_->length()) throw Error(ErrorCode::kShapeMismatch, "query length differs from data");
  return descend(query);
}

SearchResult DsTree::approximate_search(std::span<const float> query, std::size_t k) const {
  check_query(*data_, query, k);
  Stopwatch clock;
  KnnHeap heap(k);
  SearchResult result;
  scan_members(*data_, query, reorder_indices(query), nodes_[approximate_leaf(query)].ids, heap, result.stats);
  result.neighbors = heap.sorted();
  result.stats.cpu_time = clock.seconds();
  return result;
}

SearchResult DsTree::exact_search(std::span<const float> query, std::size_t k) const {
  check_query(*data_, query, k);
  Stopwatch clock;
  const SegmentStats q(query);
  const auto order = reorder_indices(query);
  KnnHeap heap(k);
  SearchResult result;
  const std::int32_t seed_leaf = descend(query);
  scan_members(*data_, query, order, nodes_[seed_leaf].ids, heap, result.stats);

  // For 1-NN a node's upper bound caps the answer, so it tightens the
  // pruning threshold; it never removes a node by itself.
  double ub_cap = std::numeric_limits<double>::infinity();
  auto threshold = [&] { return std::min(heap.threshold(), k == 1 ? ub_cap : heap.threshold()); };

  using Entry = std::pair<double, std::int32_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> frontier;
  frontier.emplace(lower_bound_sq(q, nodes_[0]), 0);
  ++result.stats.lb_computations;
  while (!frontier.empty()) {
    const auto [lb, index] = frontier.top();
    if (lb > threshold()) break;
    frontier.pop();
    const Node& node = nodes_[index];
    if (node.is_leaf()) {
      if (index != seed_leaf) scan_members(*data_, query, order, node.ids, heap, result.stats);
      continue;
    }
    for (std::int32_t child : {node.left, node.right}) {
      frontier.emplace(lower_bound_sq(q, nodes_[child]), child);
      ++result.stats.lb_computations;
      if (k == 1) ub_cap = std::min(ub_cap, upper_bound_sq(q, nodes_[child]));
    }
  }
  result.neighbors = heap.sorted();
  result.stats.cpu_time = clock.seconds();
  return result;
}

void DsTree::for_each_leaf(std::span<const float> query, const LeafVisitor& visit) const {
  const SegmentStats q(query);
  for (const Node& node : nodes_) {
    if (node.is_leaf() && node.size > 0) visit(std::sqrt(lower_bound_sq(q, node)), node.ids);
  }
}

void DsTree::save(BinaryWriter& out) const {
  out.put<std::uint64_t>(params_.leaf_threshold);
  out.put<std::uint64_t>(params_.initial_segments);
  out.put<std::uint64_t>(nodes_.size());
  for (const Node& n : nodes_) {
    out.put_vector(n.ends);
    out.put_vector(n.synopsis);
    out.put<std::int32_t>(n.left);
    out.put<std::int32_t>(n.right);
    out.put<std::uint32_t>(n.split_segment);
    out.put<double>(n.split_value);
    out.put<std::uint8_t>(n.vertical ? 1 : 0);
    out.put<std::uint64_t>(n.size);
    out.put_vector(n.ids);
  }
}

DsTree DsTree::load(BinaryReader& in, const Dataset& data) {
  DsTree tree;
  tree.data_ = &data;
  tree.params_.leaf_threshold = in.get<std::uint64_t>();
  tree.params_.initial_segments = in.get<std::uint64_t>();
  const auto count = in.get<std::uint64_t>();
  tree.nodes_.resize(count);
  for (Node& n : tree.nodes_) {
    n.ends = in.get_vector<std::uint32_t>();
    n.synopsis = in.get_vector<SegmentSynopsis>();
    n.left = in.get<std::int32_t>();
    n.right = in.get<std::int32_t>();
    n.split_segment = in.get<std::uint32_t>();
    n.split_value = in.get<double>();
    n.vertical = in.get<std::uint8_t>() != 0;
    n.size = in.get<std::uint64_t>();
    n.ids = in.get_vector<SeriesId>();
    if (n.ends.empty() || n.ends.back() != data.length() || n.synopsis.size() != n.ends.size()) {
      throw Error(ErrorCode::kCorruptIndex, "DSTree node segmentation does not match the dataset");
    }
  }
  for (const Node& n : tree.nodes_) {
    if (n.left >= static_cast<std::int64_t>(count) || n.right >= static_cast<std::int64_t>(count) ||
        (n.left >= 0 && n.split_segment >= tree.nodes_[n.left].ends.size())) {
      throw Error(ErrorCode::kCorruptIndex, "DSTree child out of range");
    }
    for (SeriesId id : n.ids) {
      if (id >= data.count()) throw Error(ErrorCode::kCorruptIndex, "leaf id out of range");
    }
  }
  if (tree.nodes_.empty()) throw Error(ErrorCode::kCorruptIndex, "empty DSTree");
  return tree;
}

}  // namespace seriescore
