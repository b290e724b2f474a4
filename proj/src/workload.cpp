#include "seriescore/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace seriescore {

double GaussianSource::uniform() {
  // 53 random bits, shifted away from zero so log() stays finite.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double GaussianSource::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Dataset gen_random_walk(const WorkloadSpec& spec) {
  if (spec.count == 0 || spec.length == 0) throw Error(ErrorCode::kConfig, "count and length must be positive");
  if (spec.normalize && spec.length < 2) throw Error(ErrorCode::kConfig, "normalized series need length >= 2");
  GaussianSource rng(spec.seed);
  std::vector<float> values;
  values.reserve(spec.count * spec.length);
  std::vector<float> walk(spec.length);
  for (std::size_t i = 0; i < spec.count; ++i) {
    for (;;) {
      double acc = 0.0;
      for (auto& v : walk) {
        acc += rng.normal();
        v = static_cast<float>(acc);
      }
      if (!spec.normalize) break;
      try {
        walk = z_normalize_values(walk);
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDegenerateSeries) throw;
      }
    }
    values.insert(values.end(), walk.begin(), walk.end());
  }
  return Dataset(spec.length, std::move(values));
}

std::vector<ControlledQuery> gen_controlled_queries(const Dataset& data, std::size_t query_count,
                                                    std::span<const double> noise_levels, std::uint64_t seed) {
  if (query_count > data.count()) throw Error(ErrorCode::kConfig, "more queries than series to draw from");
  if (noise_levels.empty() || !std::is_sorted(noise_levels.begin(), noise_levels.end()) || noise_levels.front() < 0.0) {
    throw Error(ErrorCode::kConfig, "noise levels must be non-negative and sorted ascending");
  }
  GaussianSource rng(seed);
  // Partial Fisher-Yates over ids: sources without replacement.
  std::vector<SeriesId> ids(data.count());
  std::iota(ids.begin(), ids.end(), SeriesId{0});
  std::vector<ControlledQuery> out;
  out.reserve(query_count);
  for (std::size_t q = 0; q < query_count; ++q) {
    const std::size_t remaining = ids.size() - q;
    const std::size_t pick = q + static_cast<std::size_t>(rng.next_u64() % remaining);
    std::swap(ids[q], ids[pick]);
    ControlledQuery query;
    query.source = ids[q];
    query.noise = noise_levels[q % noise_levels.size()];
    const auto src = data.series(query.source);
    if (query.noise == 0.0) {
      query.values.assign(src.begin(), src.end());
    } else {
      std::vector<float> noisy(src.size());
      for (std::size_t i = 0; i < src.size(); ++i) noisy[i] = static_cast<float>(src[i] + query.noise * rng.normal());
      query.values = z_normalize_values(noisy);
    }
    out.push_back(std::move(query));
  }
  return out;
}

Dataset queries_to_dataset(std::span<const ControlledQuery> queries) {
  Dataset d;
  for (const auto& q : queries) d.append(q.values);
  return d;
}

HardnessSplit classify_hardness(const std::vector<std::vector<double>>& ratios) {
  constexpr std::size_t kGroup = 20;
  if (ratios.size() < 2 * kGroup) throw Error(ErrorCode::kInsufficientQueries, "need at least 40 queries");
  HardnessSplit split;
  split.average_ratio.resize(ratios.size());
  for (std::size_t q = 0; q < ratios.size(); ++q) {
    if (ratios[q].empty()) throw Error(ErrorCode::kBadCounts, "query without any method ratio");
    split.average_ratio[q] = std::accumulate(ratios[q].begin(), ratios[q].end(), 0.0) / static_cast<double>(ratios[q].size());
  }
  std::vector<std::size_t> rank(ratios.size());
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::stable_sort(rank.begin(), rank.end(),
                   [&](std::size_t a, std::size_t b) { return split.average_ratio[a] > split.average_ratio[b]; });
  split.easy.assign(ratios.size(), false);
  for (std::size_t i = 0; i < rank.size() / 2; ++i) split.easy[rank[i]] = true;
  split.easy20.assign(rank.begin(), rank.begin() + kGroup);
  split.hard20.assign(rank.end() - kGroup, rank.end());
  return split;
}

}  // namespace seriescore
