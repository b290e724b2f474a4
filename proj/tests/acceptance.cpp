// Acceptance suite: runs criteria 1-8 and prints one PASS/FAIL line each.
// Exit status is non-zero when any selected criterion fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seriescore/bench.hpp"
#include "seriescore/discretize.hpp"
#include "seriescore/dstree.hpp"
#include "seriescore/isax_index.hpp"
#include "seriescore/measures.hpp"
#include "seriescore/sfa_trie.hpp"
#include "seriescore/storage.hpp"
#include "seriescore/transform.hpp"
#include "seriescore/va_file.hpp"
#include "seriescore/workload.hpp"
#include "test_support.hpp"

using namespace seriescore;

namespace {

constexpr std::size_t kLength = 256;

struct Outcome {
  bool pass = true;
  std::string detail;
  std::string first_failure;
  std::size_t failures = 0;

  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (pass) first_failure = what;
    pass = false;
    ++failures;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const std::vector<Method> kExactMethods{Method::kScan,   Method::kIsaxExact, Method::kIsaxSims,
                                        Method::kDsTree, Method::kSfa,       Method::kVaFile};

Dataset desk_dataset() { return gen_random_walk(WorkloadSpec{10000, kLength, 31, true}); }

// Per-rank distance agreement with the oracle; ids may differ only among ties.
bool matches_oracle(const NeighborSet& got, const std::vector<std::pair<double, SeriesId>>& want, std::size_t k,
                    const Dataset& data, std::span<const float> q) {
  if (got.size() != k || want.size() < k) return false;
  for (std::size_t i = 0; i < k; ++i) {
    if (!testing::rel_close(std::sqrt(got[i].sq_distance), want[i].first)) return false;
    if (got[i].id != want[i].second &&
        !testing::rel_close(testing::true_distance(q, data.series(got[i].id)), want[i].first)) {
      return false;
    }
  }
  return true;
}

// 1. Exactness suite.
Outcome exactness() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset queries = gen_random_walk(WorkloadSpec{100, kLength, 9001, true});
  std::size_t checks = 0;
  const std::size_t sizes[] = {1000, 10000, 100000};
  for (std::size_t si = 0; si < 3; ++si) {
    const std::size_t n = sizes[si];
    const Dataset data = gen_random_walk(WorkloadSpec{n, kLength, 11 + si, true});
    std::vector<std::vector<std::pair<double, SeriesId>>> oracle;
    for (SeriesId q = 0; q < queries.count(); ++q) oracle.push_back(testing::brute_knn(data, queries.series(q), 10));
    for (Method m : kExactMethods) {
      BenchConfig cfg;
      cfg.method = m;
      const Engine engine = Engine::build(data, cfg);
      for (SeriesId q = 0; q < queries.count(); ++q) {
        const auto qs = queries.series(q);
        for (std::size_t k : {1u, 10u}) {
          const auto res = engine.exact_search(qs, k);
          ++checks;
          out.expect(matches_oracle(res.neighbors, oracle[q], k, data, qs),
                     std::string(method_name(m)) + " n=" + std::to_string(n) + " q=" + std::to_string(q) +
                         " k=" + std::to_string(k));
        }
      }
    }
  }
  const double elapsed = seconds_since(t0);
  out.expect(elapsed < 600.0, "runtime " + fmt("%.1f", elapsed) + "s exceeds 10 minutes");
  out.detail = std::to_string(checks) + " searches, 6 methods, n in {1e3,1e4,1e5}, " + fmt("%.1f", elapsed) + "s";
  return out;
}

// 2. Lower-bounding soundness.
Outcome lower_bounds() {
  Outcome out;
  constexpr std::size_t kTrials = 100000;
  constexpr std::size_t kPool = 2000;
  constexpr double kTol = 1e-4;
  const Dataset pool = gen_random_walk(WorkloadSpec{kPool, kLength, 51, true});
  const Dataset raw = gen_random_walk(WorkloadSpec{kPool, kLength, 52, false});
  std::vector<std::vector<std::complex<double>>> spectra;
  std::vector<std::vector<double>> haars;
  for (SeriesId i = 0; i < kPool; ++i) {
    spectra.push_back(dft_full(pool.series(i)));
    haars.push_back(haar(pool.series(i)));
  }
  std::mt19937_64 rng(53);
  std::normal_distribution<double> gauss;
  auto pick = [&] { return static_cast<SeriesId>(rng() % kPool); };

  // Query: another pool member, or a noisy copy of the candidate (tight pairs).
  auto make_pair = [&](SeriesId& c, std::vector<float>& q) {
    c = pick();
    if (rng() % 4 == 0) {
      const auto s = pool.series(c);
      q.assign(s.begin(), s.end());
      const double sigma = 0.01 * static_cast<double>(1 + rng() % 50);
      for (auto& v : q) v = static_cast<float>(v + sigma * gauss(rng));
    } else {
      const auto s = pool.series(pick());
      q.assign(s.begin(), s.end());
    }
  };

  std::map<std::string, std::size_t> violations;
  auto record = [&](const char* rep, double lb, double ed) {
    if (!(lb <= ed + kTol) || !(lb >= 0.0)) ++violations[rep];
  };

  const std::size_t seg_options[] = {4, 8, 16, 32, 64};
  std::vector<float> q;
  SeriesId c = 0;
  for (std::size_t t = 0; t < kTrials; ++t) {
    make_pair(c, q);
    const std::size_t segs = seg_options[rng() % 5];
    record("PAA", paa_lower_bound(paa(q, segs), paa(pool.series(c), segs)), testing::true_distance(q, pool.series(c)));
  }
  for (std::size_t t = 0; t < kTrials; ++t) {
    // Raw (non-normalized) walks too: the bound holds for any input.
    const bool use_raw = t % 2 == 1;
    const Dataset& src = use_raw ? raw : pool;
    c = pick();
    const auto other = src.series(pick());
    q.assign(other.begin(), other.end());
    const std::size_t l = 2 * (1 + rng() % 20);
    const auto sq = dft_full(q);
    const auto sc = use_raw ? dft_full(src.series(c)) : spectra[c];
    record("DFT", coeff_lower_bound(dft_truncate(sq, l), dft_truncate(sc, l)), testing::true_distance(q, src.series(c)));
  }
  for (std::size_t t = 0; t < kTrials; ++t) {
    make_pair(c, q);
    const std::size_t l = 1 + rng() % 64;
    record("Haar", coeff_lower_bound(haar_truncate(haar(q), l), haar_truncate(haars[c], l)),
           testing::true_distance(q, pool.series(c)));
  }
  std::vector<Breakpoints> tables;
  for (std::uint32_t a = 2; a <= 256; a *= 2) tables.push_back(gaussian_breakpoints(a));
  for (std::size_t t = 0; t < kTrials; ++t) {
    make_pair(c, q);
    const std::size_t ti = rng() % tables.size();
    const std::uint32_t alphabet = 2u << ti;
    const std::size_t segs = seg_options[rng() % 5];
    const auto w = sax_word(paa(pool.series(c), segs), tables[ti], alphabet);
    const std::vector<std::uint8_t> bits(segs, static_cast<std::uint8_t>(ti + 1));
    record("SAX", sax_mindist(paa(q, segs), isax_promote(w, bits), tables[ti]), testing::true_distance(q, pool.series(c)));
  }
  for (std::size_t t = 0; t < kTrials; ++t) {
    make_pair(c, q);
    const std::size_t segs = seg_options[rng() % 4];
    const auto w = sax_word(paa(pool.series(c), segs), tables.back(), 256);
    std::vector<std::uint8_t> bits(segs);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() % 9);
    record("iSAX", sax_mindist(paa(q, segs), isax_promote(w, bits), tables.back()),
           testing::true_distance(q, pool.series(c)));
  }
  constexpr std::size_t kSfaL = 16;
  const Breakpoints bins[] = {train_sfa_bins(pool, kSfaL, 8, Binning::kEquiDepth),
                              train_sfa_bins(pool, kSfaL, 8, Binning::kEquiWidth)};
  for (std::size_t t = 0; t < kTrials; ++t) {
    make_pair(c, q);
    const auto dq = dft_summary(q, kSfaL);
    const auto dc = dft_truncate(spectra[c], kSfaL);
    Mbr box;
    if (t % 2 == 0) {
      // Node-style box around the candidate and a few others.
      box.lo = dc.coeffs;
      box.hi = dc.coeffs;
      const std::size_t extra = rng() % 8;
      for (std::size_t e = 0; e < extra; ++e) {
        const auto other = dft_truncate(spectra[pick()], kSfaL);
        for (std::size_t d = 0; d < kSfaL; ++d) {
          box.lo[d] = std::min(box.lo[d], other.coeffs[d]);
          box.hi[d] = std::max(box.hi[d], other.coeffs[d]);
        }
      }
    } else {
      // Word-region box from the trained bins at a random prefix length.
      const auto& bp = bins[rng() % 2];
      const std::size_t len = 1 + rng() % kSfaL;
      const auto word = sfa_word(dc, bp, len);
      box.lo.assign(kSfaL, -std::numeric_limits<double>::infinity());
      box.hi.assign(kSfaL, std::numeric_limits<double>::infinity());
      for (std::size_t d = 0; d < len; ++d) {
        const auto& cuts = bp.cuts[d];
        const auto s = word.symbols[d];
        if (s > 0) box.lo[d] = cuts[s - 1];
        if (s < cuts.size()) box.hi[d] = cuts[s];
      }
    }
    record("SFA", sfa_mbr_mindist(dq, box), testing::true_distance(q, pool.series(c)));
  }
  const VaGrid grids[] = {train_va_grid(pool, 32, 16), train_va_grid(pool, 64, 16), train_va_grid(pool, 128, 16)};
  for (std::size_t t = 0; t < kTrials; ++t) {
    make_pair(c, q);
    const VaGrid& g = grids[rng() % 3];
    const auto cell = va_cell(dft_truncate(spectra[c], 16), g);
    record("VA", va_lower_bound(dft_summary(q, 16), cell, g), testing::true_distance(q, pool.series(c)));
  }
  std::size_t total = 0;
  for (const char* rep : {"PAA", "DFT", "Haar", "SAX", "iSAX", "SFA", "VA"}) {
    total += violations[rep];
    out.expect(violations[rep] == 0, std::string(rep) + ": " + std::to_string(violations[rep]) + " violations");
  }
  out.detail = "7 representations x " + std::to_string(kTrials) + " trials, " + std::to_string(total) + " violations";
  return out;
}

// 3. TLB bounds and VA vs iSAX tightness.
Outcome tlb_trend() {
  Outcome out;
  const Dataset data = desk_dataset();
  const Dataset queries = gen_random_walk(WorkloadSpec{100, kLength, 32, true});
  const auto isax = IsaxIndex::build(data, IsaxParams{1000, 256, 16});
  const auto dst = DsTree::build(data, DsTreeParams{1000, 4});
  const auto sfa = SfaTrie::build(data, SfaParams{1000, 16, 8, Binning::kEquiDepth, 100000});
  const auto va = VaFile::build(data, VaParams{128, 16, 100000});

  std::size_t checked = 0;
  double worst = 0.0;
  auto bounded = [&](const char* name, const auto& index, std::span<const float> q) {
    TlbAccumulator acc;
    acc.add_query(index, q);
    for (double v : acc.values()) {
      ++checked;
      worst = std::max(worst, v);
      out.expect(v >= 0.0 && v <= 1.0 + 1e-4, std::string(name) + " TLB " + fmt("%.6f", v) + " out of range");
    }
    return acc.summary().mean;
  };

  double va_sum = 0, isax_leaf_sum = 0, isax_full_sum = 0;
  const std::vector<std::uint8_t> full_bits(16, 8);
  for (SeriesId qi = 0; qi < queries.count(); ++qi) {
    const auto q = queries.series(qi);
    isax_leaf_sum += bounded("isax", isax, q);
    bounded("dstree", dst, q);
    bounded("sfa", sfa, q);
    va_sum += bounded("vafile", va, q);
    // Full-cardinality iSAX bound per series: the summary array SIMS prunes with.
    const auto qp = paa(q, 16);
    double s = 0;
    for (SeriesId id = 0; id < data.count(); ++id) {
      const auto sym = isax.summary(id);
      const double lb =
          std::sqrt(sax_mindist_sq(qp.means, kLength, std::span<const std::uint8_t>(sym.data(), sym.size()), full_bits,
                                   isax.breakpoints()));
      const double v = tlb(q, lb, data, std::span<const SeriesId>(&id, 1));
      ++checked;
      out.expect(v >= 0.0 && v <= 1.0 + 1e-4, "isax full-cardinality TLB out of range");
      s += v;
    }
    isax_full_sum += s / static_cast<double>(data.count());
  }
  const double nq = static_cast<double>(queries.count());
  const double va_mean = va_sum / nq, isax_full = isax_full_sum / nq, isax_leaf = isax_leaf_sum / nq;
  out.expect(va_mean >= isax_full - 0.02,
             "mean TLB vafile " + fmt("%.4f", va_mean) + " < isax " + fmt("%.4f", isax_full) + " - 0.02");
  out.detail = std::to_string(checked) + " (query, leaf) TLBs in range (max " + fmt("%.4f", worst) +
               "); mean TLB vafile " + fmt("%.4f", va_mean) + " vs isax full-cardinality " + fmt("%.4f", isax_full) +
               " (isax leaves " + fmt("%.4f", isax_leaf) + ")";
  return out;
}

// 4. Pruning ratio falls as controlled noise grows.
Outcome pruning_trend() {
  Outcome out;
  const Dataset data = gen_random_walk(WorkloadSpec{10000, kLength, 41, true});
  const std::vector<double> levels{0.0, 0.1, 0.5, 1.0, 2.0};
  const auto qs = gen_controlled_queries(data, 100 * levels.size(), levels, 42);
  std::string summary;
  for (Method m : kExactMethods) {
    BenchConfig cfg;
    cfg.method = m;
    const Engine engine = Engine::build(data, cfg);
    std::vector<double> sum(levels.size(), 0.0);
    std::vector<std::size_t> n(levels.size(), 0);
    for (std::size_t i = 0; i < qs.size(); ++i) {
      const auto res = engine.exact_search(qs[i].values, 1);
      const std::size_t l = i % levels.size();
      sum[l] += pruning_ratio(std::min<std::uint64_t>(res.stats.series_examined, data.count()), data.count());
      ++n[l];
    }
    summary += std::string(summary.empty() ? "" : "; ") + method_name(m);
    double prev = 2.0;
    for (std::size_t l = 0; l < levels.size(); ++l) {
      const double mean = sum[l] / static_cast<double>(n[l]);
      out.expect(n[l] >= 100, "fewer than 100 queries at a noise level");
      out.expect(mean <= prev, std::string(method_name(m)) + " pruning rises at sigma " + fmt("%g", levels[l]) + ": " +
                                   fmt("%.4f", prev) + " -> " + fmt("%.4f", mean));
      summary += (l ? "," : " ") + fmt("%.3f", mean);
      prev = mean;
    }
  }
  out.detail = "mean pruning ratio at sigma 0,0.1,0.5,1,2: " + summary;
  return out;
}

// 5. Formula reproductions.
Outcome formulas() {
  Outcome out;
  out.expect(pruning_ratio(0, 100) == 1.0, "pruning_ratio(0, 100)");
  out.expect(pruning_ratio(100, 100) == 0.0, "pruning_ratio(100, 100)");
  out.expect(pruning_ratio(10, 100) == 0.9, "pruning_ratio(10, 100)");
  const Dataset leaf_data(2, {3, 4, 6, 8});
  const std::vector<float> origin{0, 0};
  const std::vector<SeriesId> leaf{0, 1};
  out.expect(tlb(origin, 7.5, leaf_data, leaf) == 1.0, "tlb at the average distance");
  out.expect(tlb(origin, 0.0, leaf_data, leaf) == 0.0, "tlb with lb 0");
  out.expect(effective_error(2.5, 2.5) == 0.0, "eps equal distances");
  out.expect(effective_error(5.0, 2.5) == 1.0, "eps doubled distance");
  out.expect(effective_error(0.0, 0.0) == 0.0, "eps both zero");
  out.expect(extrapolate_10k(std::vector<double>(100, 1.0)) == 10000.0, "extrapolate all ones");
  std::vector<double> outliers(100, 1.0);
  for (std::size_t i : {3, 20, 41, 77, 99}) outliers[i] = 100.0;
  out.expect(extrapolate_10k(outliers) == 10000.0, "extrapolate with outliers");
  auto throws = [](const std::function<void()>& fn, ErrorCode code) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code() == code;
    }
    return false;
  };
  out.expect(throws([] { pruning_ratio(5, 4); }, ErrorCode::kBadCounts), "BadCounts");
  out.expect(throws([&] { tlb(origin, 1.0, leaf_data, std::vector<SeriesId>{}); }, ErrorCode::kEmptyLeaf), "EmptyLeaf");
  out.expect(throws([] { extrapolate_10k(std::vector<double>(90, 1.0)); }, ErrorCode::kBadCardinality),
             "BadCardinality");
  out.detail = "pruning_ratio, tlb, eps_eff, extrapolate_10k hand cases exact";
  return out;
}

// 6. Structural invariants on randomized builds.
struct Stat {
  double mean, sd;
};

Stat naive_stat(std::span<const float> s, std::size_t b, std::size_t e) {
  long double sum = 0;
  for (std::size_t i = b; i < e; ++i) sum += s[i];
  const long double mean = sum / static_cast<long double>(e - b);
  long double var = 0;
  for (std::size_t i = b; i < e; ++i) var += (s[i] - mean) * (s[i] - mean);
  return {static_cast<double>(mean), static_cast<double>(std::sqrt(var / static_cast<long double>(e - b)))};
}

void check_conserved(Outcome& out, const std::vector<std::vector<SeriesId>>& leaves, std::size_t count,
                     const std::string& where) {
  std::vector<int> seen(count, 0);
  bool ok = true;
  for (const auto& leaf : leaves)
    for (SeriesId id : leaf) {
      if (id >= count) ok = false;
      else ++seen[id];
    }
  ok = ok && std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
  out.expect(ok, where + ": id conservation");
}

template <typename Index>
void check_single_leaf(Outcome& out, const Index& index, const Dataset& data, std::uint64_t seed,
                       const std::string& where) {
  std::mt19937_64 rng(seed);
  for (int i = 0; i < 5; ++i) {
    std::vector<float> q;
    if (i % 2 == 0) {
      q = testing::walk(rng, data.length());
    } else {
      const auto s = data.series(static_cast<SeriesId>(rng() % data.count()));
      q.assign(s.begin(), s.end());
    }
    const auto leaf = index.approximate_leaf(q);
    const auto res = index.approximate_search(q, 1);
    const auto& node = index.nodes()[leaf];
    out.expect(node.is_leaf(), where + ": approximate target is not a leaf");
    out.expect(res.stats.random_accesses == 1, where + ": approximate search visited more than one leaf");
    out.expect(res.stats.series_examined == node.size, where + ": approximate search read outside its leaf");
  }
}

void isax_structure(Outcome& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t count = 50 + rng() % 1200;
  const std::size_t length = std::size_t{32} << (rng() % 3);
  const Dataset data = testing::walks(1000 + seed, count, length);
  const std::uint32_t alphabet = 4u << (rng() % 7);
  const std::size_t segments = std::size_t{4} << (rng() % 3);
  const IsaxParams params{5 + rng() % 100, alphabet, segments};
  const auto index = IsaxIndex::build(data, params);
  const std::string where = "isax build " + std::to_string(seed);
  const auto& nodes = index.nodes();
  std::vector<std::vector<SeriesId>> leaves;
  for (const auto& node : nodes) {
    if (node.is_leaf()) {
      leaves.push_back(node.ids);
      for (SeriesId id : node.ids) {
        const auto w = sax_word(paa(data.series(id), segments), index.breakpoints(), alphabet);
        out.expect(isax_promote(w, node.word.bits).symbols == node.word.symbols, where + ": member outside leaf word");
      }
    } else {
      const auto& l = nodes[node.left];
      const auto& r = nodes[node.right];
      out.expect(node.size == l.size + r.size, where + ": child sizes");
      const auto j = node.split_segment;
      out.expect(l.word.bits[j] == node.word.bits[j] + 1 && l.word.symbols[j] == node.word.symbols[j] * 2 &&
                     r.word.symbols[j] == node.word.symbols[j] * 2 + 1,
                 where + ": child word does not refine parent");
    }
  }
  check_conserved(out, leaves, count, where);
  check_single_leaf(out, index, data, seed, where);
}

void dstree_structure(Outcome& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t count = 50 + rng() % 1000;
  const std::size_t length = std::size_t{32} << (rng() % 3);
  const Dataset data = testing::walks(2000 + seed, count, length);
  const DsTreeParams params{3 + rng() % 60, std::size_t{1} << (rng() % 3)};
  const auto tree = DsTree::build(data, params);
  const std::string where = "dstree build " + std::to_string(seed);
  const auto& nodes = tree.nodes();
  std::vector<std::vector<SeriesId>> below(nodes.size());
  for (std::size_t i = nodes.size(); i-- > 0;) {
    // Children are appended after their parent, so a reverse pass sees them first.
    if (nodes[i].is_leaf()) below[i] = nodes[i].ids;
  }
  std::function<const std::vector<SeriesId>&(std::size_t)> members = [&](std::size_t i) -> const std::vector<SeriesId>& {
    if (!nodes[i].is_leaf() && below[i].empty()) {
      const auto& l = members(static_cast<std::size_t>(nodes[i].left));
      const auto& r = members(static_cast<std::size_t>(nodes[i].right));
      below[i] = l;
      below[i].insert(below[i].end(), r.begin(), r.end());
    }
    return below[i];
  };
  std::vector<std::vector<SeriesId>> leaves;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& node = nodes[i];
    const auto& ids = members(i);
    out.expect(ids.size() == node.size, where + ": node size");
    for (SeriesId id : ids) {
      for (std::size_t j = 0; j < node.ends.size(); ++j) {
        const auto st = naive_stat(data.series(id), j ? node.ends[j - 1] : 0, node.ends[j]);
        const auto& syn = node.synopsis[j];
        out.expect(st.mean >= syn.min_mean - 1e-9 && st.mean <= syn.max_mean + 1e-9 && st.sd >= syn.min_std - 1e-9 &&
                       st.sd <= syn.max_std + 1e-9,
                   where + ": member outside synopsis");
      }
    }
    if (node.is_leaf()) leaves.push_back(node.ids);
  }
  check_conserved(out, leaves, count, where);
  check_single_leaf(out, tree, data, seed, where);
}

void sfa_structure(Outcome& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t count = 50 + rng() % 1200;
  const std::size_t length = std::size_t{32} << (rng() % 3);
  const Dataset data = testing::walks(3000 + seed, count, length);
  SfaParams p;
  p.leaf_threshold = 4 + rng() % 100;
  p.word_length = std::size_t{4} << (rng() % 3);
  p.alphabet = 4u << (rng() % 3);
  p.binning = rng() % 2 ? Binning::kEquiDepth : Binning::kEquiWidth;
  const auto trie = SfaTrie::build(data, p);
  const std::string where = "sfa build " + std::to_string(seed);
  const auto& nodes = trie.nodes();
  std::vector<std::vector<SeriesId>> leaves;
  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const auto ni = stack.back();
    stack.pop_back();
    const auto& node = nodes[ni];
    std::vector<SeriesId> members;
    std::vector<std::int32_t> sub{ni};
    while (!sub.empty()) {
      const auto& n = nodes[sub.back()];
      sub.pop_back();
      members.insert(members.end(), n.ids.begin(), n.ids.end());
      for (const auto& [sym, child] : n.children) sub.push_back(child);
    }
    out.expect(members.size() == node.size, where + ": node size");
    for (SeriesId id : members) {
      const auto s = dft_summary(data.series(id), p.word_length);
      for (std::size_t d = 0; d < p.word_length; ++d) {
        out.expect(s.coeffs[d] >= node.mbr.lo[d] - 1e-9 && s.coeffs[d] <= node.mbr.hi[d] + 1e-9,
                   where + ": member outside node MBR");
      }
    }
    for (const auto& [sym, child] : node.children) {
      for (std::size_t d = 0; d < p.word_length; ++d) {
        out.expect(nodes[child].mbr.lo[d] >= node.mbr.lo[d] && nodes[child].mbr.hi[d] <= node.mbr.hi[d],
                   where + ": child MBR outside parent");
      }
      stack.push_back(child);
    }
    if (node.is_leaf()) leaves.push_back(node.ids);
  }
  check_conserved(out, leaves, count, where);
  check_single_leaf(out, trie, data, seed, where);
}

void va_structure(Outcome& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t count = 50 + rng() % 1200;
  const std::size_t length = std::size_t{32} << (rng() % 3);
  const Dataset data = testing::walks(4000 + seed, count, length);
  VaParams p;
  p.coefficients = std::size_t{4} << (rng() % 3);
  p.total_bits = p.coefficients * (1 + rng() % 6);
  p.sample_size = 20 + rng() % count;
  const auto va = VaFile::build(data, p);
  const std::string where = "vafile build " + std::to_string(seed);
  out.expect(va.count() == count, where + ": cell count");
  const auto& g = va.grid();
  std::vector<std::vector<SeriesId>> leaves;
  for (SeriesId id = 0; id < count; ++id) {
    const auto s = dft_summary(data.series(id), p.coefficients);
    const auto cell = va.cell(id);
    for (std::size_t d = 0; d < p.coefficients; ++d) {
      const auto& b = g.boundaries[d];
      const auto c = cell.codes[d];
      out.expect(c <= b.size(), where + ": code out of range");
      bool inside = s.coeffs[d] >= g.extent_lo[d] && s.coeffs[d] <= g.extent_hi[d];
      if (c > 0 && c <= b.size()) inside = inside && s.coeffs[d] >= b[c - 1];
      if (c < b.size()) inside = inside && s.coeffs[d] < b[c];
      out.expect(inside, where + ": series outside its cell");
    }
  }
  std::vector<float> q(data.series(0).begin(), data.series(0).end());
  va.for_each_leaf(q, [&](double, std::span<const SeriesId> ids) { leaves.emplace_back(ids.begin(), ids.end()); });
  check_conserved(out, leaves, count, where);
}

Outcome structure() {
  Outcome out;
  constexpr std::uint64_t kBuilds = 100;
  for (std::uint64_t seed = 0; seed < kBuilds; ++seed) {
    isax_structure(out, seed);
    dstree_structure(out, seed);
    sfa_structure(out, seed);
    va_structure(out, seed);
  }
  out.detail = std::to_string(kBuilds) + " randomized builds each of isax, dstree, sfa, vafile";
  return out;
}

// 7. Determinism.
std::string serialized(const Engine& engine, const std::string& path) {
  engine.save(path);
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  Outcome out;
  const WorkloadSpec spec{3000, kLength, 71, true};
  const Dataset a = gen_random_walk(spec), b = gen_random_walk(spec);
  out.expect(a == b, "random-walk datasets differ");
  const std::vector<double> levels{0.0, 0.5, 2.0};
  const auto qa = gen_controlled_queries(a, 60, levels, 72), qb = gen_controlled_queries(a, 60, levels, 72);
  bool same_queries = qa.size() == qb.size();
  for (std::size_t i = 0; same_queries && i < qa.size(); ++i)
    same_queries = qa[i].values == qb[i].values && qa[i].source == qb[i].source && qa[i].noise == qb[i].noise;
  out.expect(same_queries, "controlled workloads differ");
  for (Binning mode : {Binning::kEquiDepth, Binning::kEquiWidth})
    out.expect(train_sfa_bins(a, 16, 8, mode) == train_sfa_bins(b, 16, 8, mode), "SFA bins differ");
  out.expect(train_va_grid(a, 64, 16) == train_va_grid(b, 64, 16), "VA+ grids differ");

  testing::TempDir dir;
  BenchConfig cfg;
  cfg.dataset_path = dir.file("data.bin");
  write_dataset(cfg.dataset_path, a);
  write_meta(default_meta_path(cfg.dataset_path), DatasetMeta{spec.count, spec.length, spec.seed, true});
  cfg.query_count = 20;
  cfg.leaf_threshold = 100;
  cfg.k = 5;
  cfg.timings = false;
  cfg.tlb = true;
  cfg.eps = true;
  cfg.verify = true;
  for (Method m : kExactMethods) {
    cfg.method = m;
    out.expect(run_scenario(cfg) == run_scenario(cfg), std::string(method_name(m)) + ": CSV differs between runs");
    const Engine e1 = Engine::build(a, cfg), e2 = Engine::build(b, cfg);
    if (m != Method::kScan)
      out.expect(serialized(e1, dir.file("a.idx")) == serialized(e2, dir.file("b.idx")),
                 std::string(method_name(m)) + ": index bytes differ");
  }
  SweepGrid grid;
  grid.methods = {Method::kDsTree, Method::kSfa};
  grid.leaf_thresholds = {50, 500};
  out.expect(sweep(cfg, grid) == sweep(cfg, grid), "sweep CSV differs between runs");
  out.detail = "datasets, controlled workloads, SFA bins, VA+ grids, index files and CSVs bit-identical";
  return out;
}

// 8. Parameter invariance.
Outcome invariance() {
  Outcome out;
  const Dataset data = desk_dataset();
  const Dataset queries = gen_random_walk(WorkloadSpec{50, kLength, 81, true});
  constexpr std::size_t kK = 10;
  std::vector<std::vector<double>> reference;
  for (SeriesId q = 0; q < queries.count(); ++q) {
    std::vector<double> d;
    for (const auto& [dist, id] : testing::brute_knn(data, queries.series(q), kK)) d.push_back(dist);
    reference.push_back(d);
  }
  double max_rel = 0.0;
  std::size_t configs = 0;
  auto compare = [&](const BenchConfig& cfg, const std::string& label) {
    const Engine engine = Engine::build(data, cfg);
    ++configs;
    for (SeriesId q = 0; q < queries.count(); ++q) {
      const auto res = engine.exact_search(queries.series(q), kK);
      bool ok = res.neighbors.size() == kK;
      for (std::size_t i = 0; ok && i < kK; ++i) {
        const double d = std::sqrt(res.neighbors[i].sq_distance);
        const double rel = std::abs(d - reference[q][i]) / std::max(1.0, reference[q][i]);
        max_rel = std::max(max_rel, rel);
        ok = rel <= 1e-9;
      }
      out.expect(ok, label + ": distances change for query " + std::to_string(q));
    }
  };
  for (Method m : {Method::kIsaxExact, Method::kIsaxSims, Method::kDsTree, Method::kSfa}) {
    for (std::size_t leaf : {10u, 100u, 1000u}) {
      for (Binning b : {Binning::kEquiDepth, Binning::kEquiWidth}) {
        if (m != Method::kSfa && b == Binning::kEquiWidth) continue;
        BenchConfig cfg;
        cfg.method = m;
        cfg.leaf_threshold = leaf;
        cfg.binning = b;
        compare(cfg, std::string(method_name(m)) + " leaf " + std::to_string(leaf) + " " + binning_name(b));
      }
    }
  }
  for (std::size_t bits : {32u, 64u, 128u}) {
    BenchConfig cfg;
    cfg.method = Method::kVaFile;
    cfg.total_bits = bits;
    compare(cfg, "vafile bits " + std::to_string(bits));
  }
  out.detail = std::to_string(configs) + " configurations on 10,000 series, max relative deviation " +
               fmt("%.2e", max_rel);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-8"};
  std::vector<int> only;
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
      {"exactness", exactness},     {"lower-bound soundness", lower_bounds}, {"TLB bound and trend", tlb_trend},
      {"pruning-hardness trend", pruning_trend}, {"formula reproductions", formulas},
      {"structural invariants", structure}, {"determinism", determinism},    {"parameter invariance", invariance}};

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), number) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r.pass = false;
      r.first_failure = std::string("exception: ") + e.what();
    }
    const double elapsed = seconds_since(t0);
    std::printf("criterion %d %s: %s [%.1fs] %s", number, criteria[i].first, r.pass ? "PASS" : "FAIL", elapsed,
                r.detail.c_str());
    if (!r.pass) std::printf(" | %zu failure(s), first: %s", r.failures, r.first_failure.c_str());
    std::printf("\n");
    std::fflush(stdout);
    failed += !r.pass;
  }
  return failed == 0 ? 0 : 1;
}
