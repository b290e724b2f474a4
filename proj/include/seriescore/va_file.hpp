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

struct VaParams {
  std::size_t total_bits = 128;
  std::size_t coefficients = 16;
  std::size_t sample_size = 100000;
};

/// Flat approximation file: one VA+ cell per series in file order, plus the
/// norm of the energy each series keeps outside the quantized coefficients.
class VaFile {
 public:
  static VaFile build(const Dataset& data, const VaParams& params);

  /// Two-phase search: bound every cell, then refine the survivors in file
  /// order, skipping any whose lower bound exceeds the current k-th distance.
  SearchResult exact_search(std::span<const float> query, std::size_t k) const;

  /// Each cell is treated as a single-series leaf.
  void for_each_leaf(std::span<const float> query, const LeafVisitor& visit) const;

  /// k-th smallest upper bound, the phase-one pruning threshold (squared).
  double upper_bound_threshold_sq(std::span<const float> query, std::size_t k) const;

  const VaParams& params() const noexcept { return params_; }
  const VaGrid& grid() const noexcept { return grid_; }
  VaCell cell(SeriesId id) const;
  double residual(SeriesId id) const noexcept { return residuals_[id]; }
  std::size_t count() const noexcept { return residuals_.size(); }
  const Dataset& data() const noexcept { return *data_; }

  void save(BinaryWriter& out) const;
  static VaFile load(BinaryReader& in, const Dataset& data);

 private:
  struct QueryContext;
  QueryContext prepare(std::span<const float> query) const;
  void cell_bounds_sq(const QueryContext& ctx, SeriesId id, double& lb, double& ub) const;

  VaParams params_;
  const Dataset* data_ = nullptr;
  VaGrid grid_;
  std::vector<std::uint16_t> codes_;  // dims per series
  std::vector<double> residuals_;
};

}  // namespace seriescore
