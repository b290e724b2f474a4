#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "seriescore/core.hpp"

namespace seriescore {

/// mt19937_64 with Box-Muller normal deviates. Both are fully specified, so
/// streams are reproducible bit-for-bit across platforms and standard
/// libraries (unlike std::normal_distribution).
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

  double uniform();  // in (0, 1)
  double normal();
  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct WorkloadSpec {
  std::size_t count = 0;
  std::size_t length = 0;
  std::uint64_t seed = 0;
  bool normalize = true;
};

/// Cumulative sums of N(0,1) steps, z-normalized per series unless disabled.
Dataset gen_random_walk(const WorkloadSpec& spec);

struct ControlledQuery {
  std::vector<float> values;
  SeriesId source = 0;
  double noise = 0.0;
};

/// Queries extracted from `data` (sources drawn without replacement) with
/// per-point Gaussian noise; noise levels are assigned round-robin.
std::vector<ControlledQuery> gen_controlled_queries(const Dataset& data, std::size_t query_count,
                                                    std::span<const double> noise_levels, std::uint64_t seed);

Dataset queries_to_dataset(std::span<const ControlledQuery> queries);

struct HardnessSplit {
  std::vector<double> average_ratio;  // per query
  std::vector<bool> easy;             // top half by average pruning ratio
  std::vector<std::size_t> easy20;
  std::vector<std::size_t> hard20;
};

/// `ratios[q][m]` is the pruning ratio of method m on query q. Queries are
/// ranked by their cross-method average (ties by index): the top 20 form
/// Easy-20, the bottom 20 Hard-20.
HardnessSplit classify_hardness(const std::vector<std::vector<double>>& ratios);

}  // namespace seriescore
