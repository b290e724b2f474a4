#include "seriescore/discretize.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/distributions/normal.hpp>

namespace seriescore {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint8_t log2_exact(std::uint32_t a) {
  if (a < 2 || a > 256 || !std::has_single_bit(a)) {
    throw Error(ErrorCode::kBadAlphabet, "alphabet must be a power of two in 2..256");
  }
  return static_cast<std::uint8_t>(std::countr_zero(a));
}

double gap(double v, double lo, double hi) {
  if (v < lo) return lo - v;
  if (v > hi) return v - hi;
  return 0.0;
}

// Forces strictly increasing cuts by nudging duplicates one ulp upward.
void make_strictly_increasing(std::vector<double>& cuts) {
  for (std::size_t i = 1; i < cuts.size(); ++i) {
    if (cuts[i] <= cuts[i - 1]) cuts[i] = std::nextafter(cuts[i - 1], kInf);
  }
}

}  // namespace

const char* binning_name(Binning mode) noexcept {
  return mode == Binning::kEquiDepth ? "equi-depth" : "equi-width";
}

Binning parse_binning(std::string_view name) {
  if (name == "equi-depth") return Binning::kEquiDepth;
  if (name == "equi-width") return Binning::kEquiWidth;
  throw Error(ErrorCode::kConfig, "unknown binning mode: " + std::string(name));
}

std::uint32_t Breakpoints::region(std::size_t dim, double value) const noexcept {
  const auto& c = cuts[dim];
  return static_cast<std::uint32_t>(std::upper_bound(c.begin(), c.end(), value) - c.begin());
}

void VaGrid::cover(std::span<const double> coeffs) {
  for (std::size_t d = 0; d < coeffs.size() && d < extent_lo.size(); ++d) {
    extent_lo[d] = std::min(extent_lo[d], coeffs[d]);
    extent_hi[d] = std::max(extent_hi[d], coeffs[d]);
  }
}

Breakpoints gaussian_breakpoints(std::uint32_t alphabet) {
  if (alphabet < 2) throw Error(ErrorCode::kBadAlphabet, "alphabet must be at least 2");
  const boost::math::normal_distribution<double> standard;
  std::vector<double> cuts(alphabet - 1);
  for (std::uint32_t i = 1; i < alphabet; ++i) {
    // Exact symmetry: mirror the lower half.
    if (2 * i > alphabet) {
      cuts[i - 1] = -cuts[alphabet - i - 1];
    } else if (2 * i == alphabet) {
      cuts[i - 1] = 0.0;
    } else {
      cuts[i - 1] = boost::math::quantile(standard, static_cast<double>(i) / alphabet);
    }
  }
  return Breakpoints{{std::move(cuts)}};
}

SaxWord sax_word(const PaaSummary& p, const Breakpoints& bp, std::uint32_t alphabet) {
  log2_exact(alphabet);
  if (bp.dimensions() != 1 || bp.alphabet() != alphabet) {
    throw Error(ErrorCode::kBadAlphabet, "breakpoints do not match the alphabet");
  }
  SaxWord w;
  w.cardinality = alphabet;
  w.symbols.reserve(p.means.size());
  for (double v : p.means) w.symbols.push_back(static_cast<std::uint8_t>(bp.region(0, v)));
  return w;
}

IsaxWord isax_promote(const SaxWord& w, std::span<const std::uint8_t> bits) {
  const std::uint8_t full = log2_exact(w.cardinality);
  if (bits.size() != w.symbols.size()) throw Error(ErrorCode::kShapeMismatch, "bits per segment mismatch");
  IsaxWord out;
  out.bits.assign(bits.begin(), bits.end());
  out.symbols.resize(w.symbols.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] > full) throw Error(ErrorCode::kBadAlphabet, "segment bits out of range");
    out.symbols[i] = static_cast<std::uint8_t>(w.symbols[i] >> (full - bits[i]));
  }
  return out;
}

std::pair<double, double> isax_region(const Breakpoints& full, std::uint8_t symbol, std::uint8_t bits) {
  const auto& cuts = full.cuts.front();
  const std::size_t full_bits = static_cast<std::size_t>(std::countr_zero(cuts.size() + 1));
  const std::size_t shift = full_bits - bits;
  const std::size_t first = static_cast<std::size_t>(symbol) << shift;
  const std::size_t last = ((static_cast<std::size_t>(symbol) + 1) << shift) - 1;
  const double lo = first == 0 ? -kInf : cuts[first - 1];
  const double hi = last >= cuts.size() ? kInf : cuts[last];
  return {lo, hi};
}

double sax_mindist_sq(std::span<const double> q_paa, std::size_t source_length, std::span<const std::uint8_t> symbols,
                      std::span<const std::uint8_t> bits, const Breakpoints& full) {
  double sum = 0.0;
  for (std::size_t i = 0; i < q_paa.size(); ++i) {
    const auto [lo, hi] = isax_region(full, symbols[i], bits[i]);
    const double d = gap(q_paa[i], lo, hi);
    sum += d * d;
  }
  return static_cast<double>(source_length) / static_cast<double>(q_paa.size()) * sum;
}

double sax_mindist(const PaaSummary& q, const IsaxWord& w, const Breakpoints& full) {
  if (q.means.size() != w.symbols.size() || w.bits.size() != w.symbols.size() || full.dimensions() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "query PAA and word differ in segment count");
  }
  const std::size_t full_bits = static_cast<std::size_t>(std::countr_zero(full.alphabet()));
  for (std::size_t i = 0; i < w.bits.size(); ++i) {
    if (w.bits[i] > full_bits || (w.symbols[i] >> w.bits[i]) != 0) {
      throw Error(ErrorCode::kShapeMismatch, "word exceeds the breakpoint cardinality");
    }
  }
  return std::sqrt(sax_mindist_sq(q.means, q.source_length, w.symbols, w.bits, full));
}

Breakpoints train_sfa_bins(std::span<const double> rows, std::size_t dims, std::uint32_t alphabet, Binning mode) {
  if (alphabet < 2 || alphabet > 256) throw Error(ErrorCode::kBadAlphabet, "alphabet must be in 2..256");
  if (dims == 0 || rows.empty() || rows.size() % dims != 0) throw Error(ErrorCode::kEmptySample, "empty training sample");
  const std::size_t m = rows.size() / dims;
  Breakpoints bp;
  bp.cuts.resize(dims);
  std::vector<double> column(m);
  for (std::size_t d = 0; d < dims; ++d) {
    for (std::size_t r = 0; r < m; ++r) column[r] = rows[r * dims + d];
    auto& cuts = bp.cuts[d];
    cuts.resize(alphabet - 1);
    if (mode == Binning::kEquiDepth) {
      std::sort(column.begin(), column.end());
      for (std::uint32_t i = 1; i < alphabet; ++i) cuts[i - 1] = column[(i * m) / alphabet];
    } else {
      const auto [mn, mx] = std::minmax_element(column.begin(), column.end());
      const double width = (*mx - *mn) / alphabet;
      for (std::uint32_t i = 1; i < alphabet; ++i) cuts[i - 1] = *mn + width * i;
    }
    make_strictly_increasing(cuts);
  }
  return bp;
}

namespace {

std::vector<double> summarize_rows(const Dataset& sample, std::size_t l, std::size_t limit) {
  if (sample.empty()) throw Error(ErrorCode::kEmptySample, "empty training sample");
  const std::size_t m = std::min(sample.count(), limit);
  const DftPlan plan(sample.length(), l);
  std::vector<double> rows(m * l);
  for (std::size_t i = 0; i < m; ++i) {
    plan.apply(sample.series(static_cast<SeriesId>(i)), std::span<double>(rows).subspan(i * l, l));
  }
  return rows;
}

constexpr std::size_t kTrainingSampleLimit = 100000;

}  // namespace

Breakpoints train_sfa_bins(const Dataset& sample, std::size_t l, std::uint32_t alphabet, Binning mode) {
  return train_sfa_bins(summarize_rows(sample, l, kTrainingSampleLimit), l, alphabet, mode);
}

SfaWord sfa_word(const DftSummary& d, const Breakpoints& bp, std::size_t len) {
  if (len > d.coeffs.size() || len > bp.dimensions()) throw Error(ErrorCode::kShapeMismatch, "word longer than summary");
  SfaWord w;
  w.symbols.resize(len);
  for (std::size_t i = 0; i < len; ++i) w.symbols[i] = static_cast<std::uint8_t>(bp.region(i, d.coeffs[i]));
  return w;
}

double mbr_mindist_sq(std::span<const double> q, std::span<const double> weights, const Mbr& mbr) {
  double sum = 0.0;
  for (std::size_t i = 0; i < mbr.lo.size(); ++i) {
    const double d = gap(q[i], mbr.lo[i], mbr.hi[i]);
    sum += weights[i] * d * d;
  }
  return sum;
}

double sfa_mbr_mindist(const DftSummary& q, const Mbr& mbr) {
  if (mbr.lo.size() != mbr.hi.size() || mbr.lo.size() > q.coeffs.size()) {
    throw Error(ErrorCode::kShapeMismatch, "MBR has more dimensions than the summary");
  }
  const auto w = dft_slot_weights(q.coeffs.size(), q.source_length);
  return std::sqrt(mbr_mindist_sq(q.coeffs, w, mbr));
}

std::vector<double> kmeans_1d(std::span<const double> sorted, std::size_t clusters, std::size_t max_iterations,
                              std::vector<double>* objective_trace) {
  const std::size_t m = sorted.size();
  if (m == 0) throw Error(ErrorCode::kEmptySample, "k-means on an empty sample");
  std::vector<double> prefix(m + 1, 0.0), prefix_sq(m + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    prefix[i + 1] = prefix[i] + sorted[i];
    prefix_sq[i + 1] = prefix_sq[i] + sorted[i] * sorted[i];
  }
  std::vector<double> centroids(clusters);
  for (std::size_t c = 0; c < clusters; ++c) {
    centroids[c] = sorted[std::min(m - 1, ((2 * c + 1) * m) / (2 * clusters))];
  }
  // Cluster c holds sorted[begin[c], begin[c+1]) given midpoint boundaries.
  auto assign = [&](const std::vector<double>& cs) {
    std::vector<std::size_t> begin(clusters + 1);
    begin[0] = 0;
    begin[clusters] = m;
    for (std::size_t c = 1; c < clusters; ++c) {
      const double boundary = 0.5 * (cs[c - 1] + cs[c]);
      begin[c] = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), boundary) - sorted.begin());
      begin[c] = std::max(begin[c], begin[c - 1]);
    }
    return begin;
  };
  auto sse = [&](const std::vector<std::size_t>& begin, const std::vector<double>& cs) {
    double total = 0.0;
    for (std::size_t c = 0; c < clusters; ++c) {
      const double cnt = static_cast<double>(begin[c + 1] - begin[c]);
      const double s1 = prefix[begin[c + 1]] - prefix[begin[c]];
      const double s2 = prefix_sq[begin[c + 1]] - prefix_sq[begin[c]];
      total += s2 - 2.0 * cs[c] * s1 + cs[c] * cs[c] * cnt;
    }
    return std::max(0.0, total);
  };
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    const auto begin = assign(centroids);
    std::vector<double> next = centroids;
    for (std::size_t c = 0; c < clusters; ++c) {
      const std::size_t cnt = begin[c + 1] - begin[c];
      if (cnt > 0) next[c] = (prefix[begin[c + 1]] - prefix[begin[c]]) / static_cast<double>(cnt);
    }
    std::sort(next.begin(), next.end());
    if (objective_trace) objective_trace->push_back(sse(assign(next), next));
    if (next == centroids) break;
    centroids = std::move(next);
  }
  return centroids;
}

std::vector<std::uint8_t> allocate_bits(std::span<const double> variances, std::size_t total_bits) {
  constexpr std::uint8_t kMaxBitsPerDim = 16;
  constexpr double kDegenerateVariance = 1e-12;
  const std::size_t dims = variances.size();
  std::vector<std::uint8_t> bits(dims, 0);
  std::vector<double> error(variances.begin(), variances.end());
  for (std::size_t b = 0; b < total_bits; ++b) {
    std::size_t best = dims;
    for (std::size_t d = 0; d < dims; ++d) {
      if (variances[d] <= kDegenerateVariance || bits[d] >= kMaxBitsPerDim) continue;
      if (best == dims || error[d] > error[best]) best = d;
    }
    if (best == dims) throw Error(ErrorCode::kBadBudget, "bit budget exceeds what the dimensions can absorb");
    ++bits[best];
    error[best] /= 4.0;
  }
  return bits;
}

VaGrid train_va_grid(std::span<const double> rows, std::size_t dims, std::size_t source_length, std::size_t total_bits) {
  if (dims == 0 || rows.empty() || rows.size() % dims != 0) throw Error(ErrorCode::kEmptySample, "empty training sample");
  if (total_bits < dims) throw Error(ErrorCode::kBadBudget, "need at least one bit per dimension in the budget");
  const std::size_t m = rows.size() / dims;
  std::vector<std::vector<double>> columns(dims, std::vector<double>(m));
  std::vector<double> variances(dims);
  for (std::size_t d = 0; d < dims; ++d) {
    double mean = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      columns[d][r] = rows[r * dims + d];
      mean += columns[d][r];
    }
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (double v : columns[d]) var += (v - mean) * (v - mean);
    variances[d] = var / static_cast<double>(m);
  }
  VaGrid g;
  g.source_length = source_length;
  g.bits = allocate_bits(variances, total_bits);
  g.centroids.resize(dims);
  g.boundaries.resize(dims);
  g.extent_lo.resize(dims);
  g.extent_hi.resize(dims);
  for (std::size_t d = 0; d < dims; ++d) {
    auto& col = columns[d];
    std::sort(col.begin(), col.end());
    g.extent_lo[d] = col.front();
    g.extent_hi[d] = col.back();
    const std::size_t cells = std::size_t{1} << g.bits[d];
    g.centroids[d] = kmeans_1d(col, cells);
    for (std::size_t c = 1; c < cells; ++c) {
      g.boundaries[d].push_back(0.5 * (g.centroids[d][c - 1] + g.centroids[d][c]));
    }
  }
  return g;
}

VaGrid train_va_grid(const Dataset& sample, std::size_t total_bits, std::size_t l) {
  return train_va_grid(summarize_rows(sample, l, kTrainingSampleLimit), l, sample.length(), total_bits);
}

VaCell va_cell(std::span<const double> coeffs, const VaGrid& g) {
  if (coeffs.size() != g.dimensions()) throw Error(ErrorCode::kShapeMismatch, "summary does not match grid");
  VaCell cell;
  cell.codes.resize(coeffs.size());
  for (std::size_t d = 0; d < coeffs.size(); ++d) {
    const auto& b = g.boundaries[d];
    cell.codes[d] = static_cast<std::uint16_t>(std::upper_bound(b.begin(), b.end(), coeffs[d]) - b.begin());
  }
  return cell;
}

VaCell va_cell(const DftSummary& d, const VaGrid& g) { return va_cell(d.coeffs, g); }

namespace {

void check_cell(const DftSummary& q, const VaCell& cell, const VaGrid& g) {
  if (q.coeffs.size() != g.dimensions() || cell.codes.size() != g.dimensions()) {
    throw Error(ErrorCode::kShapeMismatch, "query or cell does not match grid");
  }
}

}  // namespace

double va_lower_bound(const DftSummary& q, const VaCell& cell, const VaGrid& g) {
  check_cell(q, cell, g);
  double sum = 0.0;
  for (std::size_t d = 0; d < g.dimensions(); ++d) {
    const auto& b = g.boundaries[d];
    const std::size_t code = cell.codes[d];
    const double lo = code == 0 ? -kInf : b[code - 1];
    const double hi = code >= b.size() ? kInf : b[code];
    const double gp = gap(q.coeffs[d], lo, hi);
    sum += dft_slot_weight(d, g.source_length) * gp * gp;
  }
  return std::sqrt(sum);
}

double va_upper_bound(const DftSummary& q, const VaCell& cell, const VaGrid& g, double q_residual, double c_residual) {
  check_cell(q, cell, g);
  double sum = 0.0;
  for (std::size_t d = 0; d < g.dimensions(); ++d) {
    const auto& b = g.boundaries[d];
    const std::size_t code = cell.codes[d];
    const double lo = code == 0 ? std::min(g.extent_lo[d], b.empty() ? g.extent_lo[d] : b.front()) : b[code - 1];
    const double hi = code >= b.size() ? std::max(g.extent_hi[d], b.empty() ? g.extent_hi[d] : b.back()) : b[code];
    const double far = std::max(std::fabs(q.coeffs[d] - lo), std::fabs(q.coeffs[d] - hi));
    sum += dft_slot_weight(d, g.source_length) * far * far;
  }
  const double r = q_residual + c_residual;
  return std::sqrt(sum + r * r);
}

}  // namespace seriescore
