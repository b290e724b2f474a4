#pragma once

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "seriescore/core.hpp"
#include "seriescore/storage.hpp"
#include "test_support.hpp"

namespace testing {

// Exact result equals the brute-force oracle: distances within 1e-5
// relative, ids equal except where distances tie.
inline void check_exact(const seriescore::SearchResult& got, const seriescore::Dataset& data,
                        std::span<const float> q, std::size_t k) {
  const auto want = brute_knn(data, q, k);
  REQUIRE(got.neighbors.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    const double d = std::sqrt(got.neighbors[i].sq_distance);
    CHECK(rel_close(d, want[i].first));
    if (got.neighbors[i].id != want[i].second) {
      const double other = true_distance(q, data.series(got.neighbors[i].id));
      CHECK(rel_close(other, want[i].first));
    }
  }
  CHECK(got.stats.series_examined <= data.count());
}

// Each id appears in exactly one leaf.
inline void check_conservation(const std::vector<std::vector<seriescore::SeriesId>>& leaves, std::size_t count) {
  std::vector<int> seen(count, 0);
  std::size_t total = 0;
  for (const auto& leaf : leaves) {
    for (auto id : leaf) {
      REQUIRE(id < count);
      ++seen[id];
    }
    total += leaf.size();
  }
  CHECK(total == count);
  CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
}

template <typename Index>
std::vector<std::vector<seriescore::SeriesId>> leaves_of(const Index& index, std::span<const float> any_query) {
  std::vector<std::vector<seriescore::SeriesId>> leaves;
  index.for_each_leaf(any_query, [&](double, std::span<const seriescore::SeriesId> ids) {
    leaves.emplace_back(ids.begin(), ids.end());
  });
  return leaves;
}

// Every leaf lower bound is at most the distance to each member, and the
// resulting TLB never exceeds 1.
template <typename Index>
void check_leaf_bounds(const Index& index, const seriescore::Dataset& data, std::span<const float> q) {
  index.for_each_leaf(q, [&](double lb, std::span<const seriescore::SeriesId> ids) {
    double min_d = 1e300;
    for (auto id : ids) min_d = std::min(min_d, true_distance(q, data.series(id)));
    CHECK(lb <= min_d + 1e-4);
    CHECK(lb >= 0.0);
  });
}

template <typename Index>
Index round_trip(const Index& index, const seriescore::Dataset& data) {
  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  seriescore::BinaryWriter w(buf);
  index.save(w);
  seriescore::BinaryReader r(buf);
  return Index::load(r, data);
}

inline void check_same(const seriescore::SearchResult& a, const seriescore::SearchResult& b) {
  CHECK(a.neighbors == b.neighbors);
  CHECK(a.stats.series_examined == b.stats.series_examined);
  CHECK(a.stats.random_accesses == b.stats.random_accesses);
  CHECK(a.stats.sequential_accesses == b.stats.sequential_accesses);
  CHECK(a.stats.lb_computations == b.stats.lb_computations);
}

// Noisy copies of stored series plus fresh random walks.
inline std::vector<std::vector<float>> mixed_queries(const seriescore::Dataset& data, std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<std::vector<float>> qs;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 3 == 0) {
      qs.push_back(walk(rng, data.length()));
    } else {
      const auto s = data.series(static_cast<seriescore::SeriesId>(rng() % data.count()));
      std::vector<float> v(s.begin(), s.end());
      const double sigma = (i % 3 == 1) ? 0.0 : 0.3;
      for (auto& x : v) x = static_cast<float>(x + sigma * g(rng));
      qs.push_back(v);
    }
  }
  return qs;
}

}  // namespace testing
