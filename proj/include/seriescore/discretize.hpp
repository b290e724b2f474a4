#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "seriescore/core.hpp"
#include "seriescore/transform.hpp"

namespace seriescore {

/// Per-dimension sorted cut values. Region r of a dimension is
/// [cut[r-1], cut[r]) with open ends below the first and above the last cut.
struct Breakpoints {
  std::vector<std::vector<double>> cuts;

  std::size_t dimensions() const noexcept { return cuts.size(); }
  std::size_t alphabet() const noexcept { return cuts.empty() ? 0 : cuts.front().size() + 1; }
  /// Region index of `value` in dimension `dim`; values on a cut go up.
  std::uint32_t region(std::size_t dim, double value) const noexcept;

  friend bool operator==(const Breakpoints&, const Breakpoints&) = default;
};

struct SaxWord {
  std::vector<std::uint8_t> symbols;
  std::uint32_t cardinality = 0;
};

struct IsaxWord {
  std::vector<std::uint8_t> symbols;
  std::vector<std::uint8_t> bits;

  friend bool operator==(const IsaxWord&, const IsaxWord&) = default;
};

struct SfaWord {
  std::vector<std::uint8_t> symbols;
};

enum class Binning { kEquiDepth, kEquiWidth };

const char* binning_name(Binning mode) noexcept;
Binning parse_binning(std::string_view name);

/// Axis-aligned box in half-complex DFT coefficient space.
struct Mbr {
  std::vector<double> lo;
  std::vector<double> hi;
};

struct VaGrid {
  std::size_t source_length = 0;
  std::vector<std::uint8_t> bits;
  std::vector<std::vector<double>> centroids;
  std::vector<std::vector<double>> boundaries;  // 2^bits - 1 interior cuts per dim
  std::vector<double> extent_lo;
  std::vector<double> extent_hi;

  std::size_t dimensions() const noexcept { return bits.size(); }
  /// Widens the outer extents so that `coeffs` falls inside the grid.
  void cover(std::span<const double> coeffs);

  friend bool operator==(const VaGrid&, const VaGrid&) = default;
};

struct VaCell {
  std::vector<std::uint16_t> codes;

  friend bool operator==(const VaCell&, const VaCell&) = default;
};

/// a-1 standard normal quantiles at i/a, as a single shared dimension.
Breakpoints gaussian_breakpoints(std::uint32_t alphabet);

SaxWord sax_word(const PaaSummary& p, const Breakpoints& bp, std::uint32_t alphabet);
IsaxWord isax_promote(const SaxWord& w, std::span<const std::uint8_t> bits);

/// Bounds of the region of `symbol` at cardinality 2^bits, derived from the
/// full-cardinality gaussian table so that coarser cuts are exact subsets.
std::pair<double, double> isax_region(const Breakpoints& full, std::uint8_t symbol, std::uint8_t bits);

double sax_mindist(const PaaSummary& q, const IsaxWord& w, const Breakpoints& full);
/// Squared MINDIST without the sqrt, shared with the index code paths.
double sax_mindist_sq(std::span<const double> q_paa, std::size_t source_length, std::span<const std::uint8_t> symbols,
                      std::span<const std::uint8_t> bits, const Breakpoints& full);

/// Trains per-dimension bins on row-major coefficient rows of width `dims`.
Breakpoints train_sfa_bins(std::span<const double> rows, std::size_t dims, std::uint32_t alphabet, Binning mode);
Breakpoints train_sfa_bins(const Dataset& sample, std::size_t l, std::uint32_t alphabet, Binning mode);

SfaWord sfa_word(const DftSummary& d, const Breakpoints& bp, std::size_t len);
double sfa_mbr_mindist(const DftSummary& q, const Mbr& mbr);
double mbr_mindist_sq(std::span<const double> q, std::span<const double> weights, const Mbr& mbr);

/// 1-D Lloyd k-means on sorted values, initialised at equally spaced quantiles.
/// `objective_trace`, when given, receives the SSE after every update step.
std::vector<double> kmeans_1d(std::span<const double> sorted, std::size_t clusters, std::size_t max_iterations = 100,
                              std::vector<double>* objective_trace = nullptr);

/// Greedy allocation: each bit goes to the dimension with the largest
/// variance / 4^bits (lowest index on ties); near-constant dims get none.
std::vector<std::uint8_t> allocate_bits(std::span<const double> variances, std::size_t total_bits);

VaGrid train_va_grid(std::span<const double> rows, std::size_t dims, std::size_t source_length, std::size_t total_bits);
VaGrid train_va_grid(const Dataset& sample, std::size_t total_bits, std::size_t l);

VaCell va_cell(const DftSummary& d, const VaGrid& g);
VaCell va_cell(std::span<const double> coeffs, const VaGrid& g);

/// Distance from q to the nearest point of the cell box (outer cells unbounded).
double va_lower_bound(const DftSummary& q, const VaCell& cell, const VaGrid& g);
/// Distance to the farthest corner of the cell box (outer cells clipped to the
/// grid extents). With both residual norms (energy outside the kept
/// coefficients) it bounds the full Euclidean distance; with zeros it is a
/// coefficient-space bound only.
double va_upper_bound(const DftSummary& q, const VaCell& cell, const VaGrid& g, double q_residual = 0.0,
                      double c_residual = 0.0);

}  // namespace seriescore
