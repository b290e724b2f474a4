#include "seriescore/va_file.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "seriescore/storage.hpp"
#include "search_util.hpp"
#include "stopwatch.hpp"

namespace seriescore {

struct VaFile::QueryContext {
  std::vector<double> coeffs;
  double residual = 0.0;
  std::vector<std::uint32_t> order;
  // Per dimension, per cell code: weighted squared near / far distances.
  std::vector<std::vector<double>> near_sq;
  std::vector<std::vector<double>> far_sq;
};

namespace {

double residual_norm(std::span<const float> s, std::span<const double> coeffs, std::span<const double> weights) {
  double energy = 0.0;
  for (float v : s) energy += static_cast<double>(v) * v;
  for (std::size_t d = 0; d < coeffs.size(); ++d) energy -= weights[d] * coeffs[d] * coeffs[d];
  return std::sqrt(std::max(0.0, energy));
}

}  // namespace

VaFile VaFile::build(const Dataset& data, const VaParams& params) {
  if (data.empty()) throw Error(ErrorCode::kEmptySample, "cannot index an empty dataset");
  const std::size_t l = params.coefficients;
  if (l == 0 || l % 2 != 0 || l > data.length()) throw Error(ErrorCode::kBadLength, "coefficient count must be even and <= n");
  VaFile va;
  va.params_ = params;
  va.data_ = &data;
  const std::size_t count = data.count();
  const DftPlan plan(data.length(), l);
  const auto weights = dft_slot_weights(l, data.length());
  std::vector<double> rows(count * l);
  va.residuals_.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto s = data.series(static_cast<SeriesId>(i));
    const auto row = std::span<double>(rows).subspan(i * l, l);
    plan.apply(s, row);
    va.residuals_[i] = residual_norm(s, row, weights);
  }
  const std::size_t sample = std::min(count, std::max<std::size_t>(1, params.sample_size));
  va.grid_ = train_va_grid(std::span<const double>(rows).first(sample * l), l, data.length(), params.total_bits);
  va.codes_.resize(count * l);
  for (std::size_t i = 0; i < count; ++i) {
    const auto row = std::span<const double>(rows).subspan(i * l, l);
    va.grid_.cover(row);
    const auto cell = va_cell(row, va.grid_);
    std::copy(cell.codes.begin(), cell.codes.end(), va.codes_.begin() + static_cast<std::ptrdiff_t>(i * l));
  }
  return va;
}

VaCell VaFile::cell(SeriesId id) const {
  const std::size_t l = grid_.dimensions();
  const auto first = codes_.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(id) * l);
  return VaCell{std::vector<std::uint16_t>(first, first + static_cast<std::ptrdiff_t>(l))};
}

VaFile::QueryContext VaFile::prepare(std::span<const float> query) const {
  QueryContext ctx;
  const std::size_t l = grid_.dimensions();
  ctx.coeffs = dft_summary(query, l).coeffs;
  const auto weights = dft_slot_weights(l, data_->length());
  ctx.residual = residual_norm(query, ctx.coeffs, weights);
  ctx.order = reorder_indices(query);
  ctx.near_sq.resize(l);
  ctx.far_sq.resize(l);
  for (std::size_t d = 0; d < l; ++d) {
    const auto& b = grid_.boundaries[d];
    const std::size_t cells = b.size() + 1;
    ctx.near_sq[d].resize(cells);
    ctx.far_sq[d].resize(cells);
    const double q = ctx.coeffs[d];
    for (std::size_t c = 0; c < cells; ++c) {
      // Outer cells are clipped to the extent of the indexed data.
      const double lo = c == 0 ? std::min(grid_.extent_lo[d], b.empty() ? grid_.extent_lo[d] : b.front()) : b[c - 1];
      const double hi = c + 1 == cells ? std::max(grid_.extent_hi[d], b.empty() ? grid_.extent_hi[d] : b.back()) : b[c];
      const double gap = q < lo ? lo - q : (q > hi ? q - hi : 0.0);
      const double far = std::max(std::fabs(q - lo), std::fabs(q - hi));
      ctx.near_sq[d][c] = weights[d] * gap * gap;
      ctx.far_sq[d][c] = weights[d] * far * far;
    }
  }
  return ctx;
}

void VaFile::cell_bounds_sq(const QueryContext& ctx, SeriesId id, double& lb, double& ub) const {
  const std::size_t l = grid_.dimensions();
  const std::uint16_t* codes = codes_.data() + static_cast<std::size_t>(id) * l;
  lb = 0.0;
  ub = 0.0;
  for (std::size_t d = 0; d < l; ++d) {
    lb += ctx.near_sq[d][codes[d]];
    ub += ctx.far_sq[d][codes[d]];
  }
  const double r = ctx.residual + residuals_[id];
  ub += r * r;
}

double VaFile::upper_bound_threshold_sq(std::span<const float> query, std::size_t k) const {
  check_query(*data_, query, k);
  const auto ctx = prepare(query);
  std::priority_queue<double> kth;
  for (SeriesId id = 0; id < count(); ++id) {
    double lb, ub;
    cell_bounds_sq(ctx, id, lb, ub);
    if (kth.size() < k) {
      kth.push(ub);
    } else if (ub < kth.top()) {
      kth.pop();
      kth.push(ub);
    }
  }
  return kth.top();
}

SearchResult VaFile::exact_search(std::span<const float> query, std::size_t k) const {
  check_query(*data_, query, k);
  Stopwatch clock;
  const auto ctx = prepare(query);
  const auto n = static_cast<SeriesId>(count());
  SearchResult result;

  std::vector<double> lower(n);
  std::priority_queue<double> kth_upper;
  for (SeriesId id = 0; id < n; ++id) {
    double ub;
    cell_bounds_sq(ctx, id, lower[id], ub);
    if (kth_upper.size() < k) {
      kth_upper.push(ub);
    } else if (ub < kth_upper.top()) {
      kth_upper.pop();
      kth_upper.push(ub);
    }
  }
  result.stats.lb_computations = n;
  const double theta = kth_upper.top();

  KnnHeap heap(k);
  SkipSequentialCursor cursor(result.stats);
  for (SeriesId id = 0; id < n; ++id) {
    if (lower[id] > theta || lower[id] > heap.threshold()) {
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

void VaFile::for_each_leaf(std::span<const float> query, const LeafVisitor& visit) const {
  const auto ctx = prepare(query);
  for (SeriesId id = 0; id < count(); ++id) {
    double lb, ub;
    cell_bounds_sq(ctx, id, lb, ub);
    visit(std::sqrt(lb), std::span<const SeriesId>(&id, 1));
  }
}

void VaFile::save(BinaryWriter& out) const {
  out.put<std::uint64_t>(params_.total_bits);
  out.put<std::uint64_t>(params_.coefficients);
  out.put<std::uint64_t>(params_.sample_size);
  out.put<std::uint64_t>(grid_.source_length);
  out.put_vector(grid_.bits);
  for (std::size_t d = 0; d < grid_.dimensions(); ++d) {
    out.put_vector(grid_.centroids[d]);
    out.put_vector(grid_.boundaries[d]);
  }
  out.put_vector(grid_.extent_lo);
  out.put_vector(grid_.extent_hi);
  out.put_vector(codes_);
  out.put_vector(residuals_);
}

VaFile VaFile::load(BinaryReader& in, const Dataset& data) {
  VaFile va;
  va.data_ = &data;
  va.params_.total_bits = in.get<std::uint64_t>();
  va.params_.coefficients = in.get<std::uint64_t>();
  va.params_.sample_size = in.get<std::uint64_t>();
  va.grid_.source_length = in.get<std::uint64_t>();
  va.grid_.bits = in.get_vector<std::uint8_t>();
  const std::size_t l = va.grid_.bits.size();
  if (l != va.params_.coefficients || va.grid_.source_length != data.length()) {
    throw Error(ErrorCode::kCorruptIndex, "VA grid does not match the dataset");
  }
  for (std::size_t d = 0; d < l; ++d) {
    va.grid_.centroids.push_back(in.get_vector<double>());
    va.grid_.boundaries.push_back(in.get_vector<double>());
    if (va.grid_.boundaries[d].size() + 1 != (std::size_t{1} << va.grid_.bits[d])) {
      throw Error(ErrorCode::kCorruptIndex, "VA grid boundary count mismatch");
    }
  }
  va.grid_.extent_lo = in.get_vector<double>();
  va.grid_.extent_hi = in.get_vector<double>();
  va.codes_ = in.get_vector<std::uint16_t>();
  va.residuals_ = in.get_vector<double>();
  if (va.codes_.size() != data.count() * l || va.residuals_.size() != data.count() || va.grid_.extent_lo.size() != l ||
      va.grid_.extent_hi.size() != l) {
    throw Error(ErrorCode::kCorruptIndex, "VA approximations do not match the dataset");
  }
  for (std::size_t i = 0; i < va.codes_.size(); ++i) {
    if (va.codes_[i] > va.grid_.boundaries[i % l].size()) throw Error(ErrorCode::kCorruptIndex, "VA cell code out of range");
  }
  return va;
}

}  // namespace seriescore
