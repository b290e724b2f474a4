#include "seriescore/bench.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <variant>

#include "seriescore/dstree.hpp"
#include "seriescore/isax_index.hpp"
#include "seriescore/measures.hpp"
#include "seriescore/sfa_trie.hpp"
#include "seriescore/storage.hpp"
#include "seriescore/va_file.hpp"
#include "seriescore/workload.hpp"
#include "stopwatch.hpp"

namespace seriescore {

namespace {

constexpr const char* kNa = "NA";

struct MethodInfo {
  Method method;
  const char* name;
};

constexpr MethodInfo kMethods[] = {
    {Method::kScan, "scan"},       {Method::kIsaxExact, "isax-exact"}, {Method::kIsaxSims, "isax-sims"},
    {Method::kDsTree, "dstree"},   {Method::kSfa, "sfa"},        {Method::kVaFile, "vafile"},
};

struct ScenarioInfo {
  Scenario scenario;
  const char* name;
};

constexpr ScenarioInfo kScenarios[] = {
    {Scenario::kIdx, "Idx"},
    {Scenario::kExactQ, "ExactQ"},
    {Scenario::kIdxExactQ, "Idx+ExactQ"},
    {Scenario::kIdxExtrapolate10K, "Idx+Extrapolate10K"},
};

MethodTag tag_for(Method m) {
  switch (m) {
    case Method::kScan: return MethodTag::kScan;
    case Method::kIsaxExact:
    case Method::kIsaxSims: return MethodTag::kIsax;
    case Method::kDsTree: return MethodTag::kDsTree;
    case Method::kSfa: return MethodTag::kSfa;
    case Method::kVaFile: return MethodTag::kVaFile;
  }
  return MethodTag::kScan;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string fmt_u(std::uint64_t v) { return std::to_string(v); }

}  // namespace

const char* method_name(Method m) noexcept {
  for (const auto& info : kMethods) {
    if (info.method == m) return info.name;
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (const auto& info : kMethods) {
    if (name == info.name) return info.method;
  }
  throw Error(ErrorCode::kConfig, "unknown method: " + std::string(name));
}

const char* scenario_name(Scenario s) noexcept {
  for (const auto& info : kScenarios) {
    if (info.scenario == s) return info.name;
  }
  return "?";
}

Scenario parse_scenario(std::string_view name) {
  for (const auto& info : kScenarios) {
    if (name == info.name) return info.scenario;
  }
  throw Error(ErrorCode::kConfig, "unknown scenario: " + std::string(name));
}

std::uint32_t effective_alphabet(const BenchConfig& cfg) noexcept {
  if (cfg.alphabet != 0) return cfg.alphabet;
  return cfg.method == Method::kSfa ? 8u : 256u;
}

std::size_t effective_total_bits(const BenchConfig& cfg) noexcept {
  return cfg.total_bits != 0 ? cfg.total_bits : 8 * cfg.segments;
}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kDegenerateSeries:
    case ErrorCode::kLengthMismatch:
    case ErrorCode::kShapeMismatch:
    case ErrorCode::kEmptyDataset:
    case ErrorCode::kNonFinite:
    case ErrorCode::kSizeMismatch:
    case ErrorCode::kBadFloat:
    case ErrorCode::kCorruptIndex:
    case ErrorCode::kIo:
      return kExitData;
    default:
      return kExitConfig;
  }
}

// ---- Engine ----------------------------------------------------------------

struct Engine::Impl {
  Method method;
  const Dataset* data;
  std::variant<std::monostate, IsaxIndex, DsTree, SfaTrie, VaFile> index;
};

Engine::Engine(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Engine::Engine(Engine&&) noexcept = default;
Engine& Engine::operator=(Engine&&) noexcept = default;
Engine::~Engine() = default;

Engine Engine::build(const Dataset& data, const BenchConfig& cfg) {
  auto impl = std::make_unique<Impl>();
  impl->method = cfg.method;
  impl->data = &data;
  switch (cfg.method) {
    case Method::kScan:
      if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "empty dataset");
      break;
    case Method::kIsaxExact:
    case Method::kIsaxSims:
      impl->index = IsaxIndex::build(data, IsaxParams{cfg.leaf_threshold, effective_alphabet(cfg), cfg.segments});
      break;
    case Method::kDsTree:
      impl->index = DsTree::build(data, DsTreeParams{cfg.leaf_threshold, cfg.initial_segments});
      break;
    case Method::kSfa: {
      SfaParams p;
      p.leaf_threshold = cfg.leaf_threshold;
      p.word_length = cfg.segments;
      p.alphabet = effective_alphabet(cfg);
      p.binning = cfg.binning;
      impl->index = SfaTrie::build(data, p);
      break;
    }
    case Method::kVaFile: {
      VaParams p;
      p.total_bits = effective_total_bits(cfg);
      p.coefficients = cfg.segments;
      impl->index = VaFile::build(data, p);
      break;
    }
  }
  return Engine(std::move(impl));
}

Engine Engine::load(const std::string& path, const Dataset& data, const BenchConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open index " + path);
  BinaryReader reader(in);
  read_index_header(reader, tag_for(cfg.method), data);
  auto impl = std::make_unique<Impl>();
  impl->method = cfg.method;
  impl->data = &data;
  switch (cfg.method) {
    case Method::kScan: break;
    case Method::kIsaxExact:
    case Method::kIsaxSims: impl->index = IsaxIndex::load(reader, data); break;
    case Method::kDsTree: impl->index = DsTree::load(reader, data); break;
    case Method::kSfa: impl->index = SfaTrie::load(reader, data); break;
    case Method::kVaFile: impl->index = VaFile::load(reader, data); break;
  }
  return Engine(std::move(impl));
}

void Engine::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot create index " + path);
  BinaryWriter writer(out);
  write_index_header(writer, tag_for(impl_->method), *impl_->data);
  std::visit(
      [&](const auto& index) {
        if constexpr (!std::is_same_v<std::decay_t<decltype(index)>, std::monostate>) index.save(writer);
      },
      impl_->index);
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

Method Engine::method() const noexcept { return impl_->method; }
const Dataset& Engine::data() const noexcept { return *impl_->data; }

SearchResult Engine::exact_search(std::span<const float> query, std::size_t k) const {
  switch (impl_->method) {
    case Method::kScan: return scan_knn(*impl_->data, query, k);
    case Method::kIsaxExact: return std::get<IsaxIndex>(impl_->index).exact_search(query, k);
    case Method::kIsaxSims: return std::get<IsaxIndex>(impl_->index).sims_exact_search(query, k);
    case Method::kDsTree: return std::get<DsTree>(impl_->index).exact_search(query, k);
    case Method::kSfa: return std::get<SfaTrie>(impl_->index).exact_search(query, k);
    case Method::kVaFile: return std::get<VaFile>(impl_->index).exact_search(query, k);
  }
  throw Error(ErrorCode::kConfig, "unknown method");
}

std::optional<SearchResult> Engine::approximate_search(std::span<const float> query, std::size_t k) const {
  switch (impl_->method) {
    case Method::kIsaxExact:
    case Method::kIsaxSims: return std::get<IsaxIndex>(impl_->index).approximate_search(query, k);
    case Method::kDsTree: return std::get<DsTree>(impl_->index).approximate_search(query, k);
    case Method::kSfa: return std::get<SfaTrie>(impl_->index).approximate_search(query, k);
    default: return std::nullopt;
  }
}

bool Engine::for_each_leaf(std::span<const float> query, const LeafVisitor& visit) const {
  return std::visit(
      [&](const auto& index) {
        if constexpr (std::is_same_v<std::decay_t<decltype(index)>, std::monostate>) {
          return false;
        } else {
          index.for_each_leaf(query, visit);
          return true;
        }
      },
      impl_->index);
}

// ---- CSV -------------------------------------------------------------------

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> columns = {
      "row_type",        "method",          "scenario",         "query",
      "k",               "leaf_threshold",  "segments",         "alphabet",
      "binning",         "total_bits",      "build_seconds",    "total_seconds",
      "cpu_seconds",     "input_seconds",   "output_seconds",   "series_examined",
      "random_accesses", "sequential_accesses", "lb_computations", "pruning_ratio",
      "tlb",             "tlb_leaves",      "tlb_capped",       "eps_eff",         "extrapolated_10k_seconds", "neighbor_ids",
      "neighbor_distances", "oracle_match",
  };
  return columns;
}

std::string csv_header() {
  std::string line;
  for (const auto& c : csv_columns()) {
    if (!line.empty()) line += ',';
    line += c;
  }
  return line + '\n';
}

bool neighbors_match(const NeighborSet& got, const NeighborSet& expected, double rel_tol) {
  if (got.size() != expected.size()) return false;
  auto close = [&](double a, double b) {
    const double da = std::sqrt(a), db = std::sqrt(b);
    return std::abs(da - db) <= rel_tol * std::max({1.0, da, db});
  };
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (!close(got[i].sq_distance, expected[i].sq_distance)) return false;
  }
  // Ids must agree except where they sit among tied distances; compare as
  // multisets within each run of tied expected distances.
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (got[i].id == expected[i].id) continue;
    bool found = false;
    for (std::size_t j = 0; j < expected.size() && !found; ++j) {
      found = expected[j].id == got[i].id && close(expected[j].sq_distance, got[i].sq_distance);
    }
    if (!found) return false;
  }
  return true;
}

namespace {

struct Row {
  std::vector<std::string> f;
  Row() : f(csv_columns().size()) {}
  std::string& operator[](const char* column) {
    const auto& cols = csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (cols[i] == column) return f[i];
    }
    throw Error(ErrorCode::kConfig, std::string("unknown column ") + column);
  }
  std::string str() const {
    std::string line;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i) line += ',';
      line += f[i].empty() ? kNa : f[i];
    }
    return line + '\n';
  }
};

void fill_params(Row& row, const BenchConfig& cfg) {
  row["method"] = method_name(cfg.method);
  row["scenario"] = scenario_name(cfg.scenario);
  row["k"] = fmt_u(cfg.k);
  const Method m = cfg.method;
  if (m != Method::kScan && m != Method::kVaFile) row["leaf_threshold"] = fmt_u(cfg.leaf_threshold);
  if (m == Method::kDsTree) {
    row["segments"] = fmt_u(cfg.initial_segments);
  } else if (m != Method::kScan) {
    row["segments"] = fmt_u(cfg.segments);
  }
  if (m == Method::kIsaxExact || m == Method::kIsaxSims || m == Method::kSfa) row["alphabet"] = fmt_u(effective_alphabet(cfg));
  if (m == Method::kSfa) row["binning"] = binning_name(cfg.binning);
  if (m == Method::kVaFile) row["total_bits"] = fmt_u(effective_total_bits(cfg));
}

void fill_stats(Row& row, const AccessStats& s) {
  row["series_examined"] = fmt_u(s.series_examined);
  row["random_accesses"] = fmt_u(s.random_accesses);
  row["sequential_accesses"] = fmt_u(s.sequential_accesses);
  row["lb_computations"] = fmt_u(s.lb_computations);
}

void add_stats(AccessStats& into, const AccessStats& s) {
  into.series_examined += s.series_examined;
  into.random_accesses += s.random_accesses;
  into.sequential_accesses += s.sequential_accesses;
  into.lb_computations += s.lb_computations;
  into.cpu_time += s.cpu_time;
  into.input_time += s.input_time;
  into.output_time += s.output_time;
}

Dataset load_with_meta(const std::string& path, std::string meta_path, std::size_t buffer_bytes, AccessStats* stats) {
  if (meta_path.empty()) meta_path = default_meta_path(path);
  return load_dataset(path, read_meta(meta_path), buffer_bytes, stats);
}

Dataset load_queries(const BenchConfig& cfg, const Dataset& data, bool normalized) {
  if (!cfg.queries_path.empty()) {
    Dataset q = load_with_meta(cfg.queries_path, "", cfg.buffer_bytes, nullptr);
    if (q.length() != data.length()) throw Error(ErrorCode::kLengthMismatch, "query length differs from dataset length");
    if (q.count() <= cfg.query_count) return q;
    return Dataset(q.length(), std::vector<float>(q.raw().begin(), q.raw().begin() + cfg.query_count * q.length()));
  }
  // Offset the seed so default queries never replay a dataset generated with the same seed.
  constexpr std::uint64_t kQueryStream = 0x9e3779b97f4a7c15ULL;
  return gen_random_walk(WorkloadSpec{cfg.query_count, data.length(), cfg.query_seed ^ kQueryStream, normalized});
}

void validate(const BenchConfig& cfg) {
  if (cfg.dataset_path.empty()) throw Error(ErrorCode::kConfig, "dataset path required");
  if (cfg.k == 0) throw Error(ErrorCode::kConfig, "k must be positive");
  if (cfg.leaf_threshold == 0) throw Error(ErrorCode::kConfig, "leaf threshold must be positive");
  if (cfg.buffer_bytes == 0) throw Error(ErrorCode::kConfig, "buffer size must be positive");
  if (cfg.query_count == 0 && cfg.scenario != Scenario::kIdx) throw Error(ErrorCode::kConfig, "query count must be positive");
  if (cfg.scenario == Scenario::kIdxExtrapolate10K && cfg.query_count < 100) {
    throw Error(ErrorCode::kConfig, "Idx+Extrapolate10K needs 100 queries");
  }
}

}  // namespace

std::string run_scenario(const BenchConfig& cfg, bool* verification_failed) {
  validate(cfg);
  if (verification_failed) *verification_failed = false;
  const double clock = cfg.timings ? 1.0 : 0.0;
  std::string body;

  AccessStats load_stats;
  Stopwatch input_watch;
  DatasetMeta meta = read_meta(cfg.meta_path.empty() ? default_meta_path(cfg.dataset_path) : cfg.meta_path);
  const Dataset data = load_dataset(cfg.dataset_path, meta, cfg.buffer_bytes, &load_stats);
  double input_seconds = input_watch.seconds();

  const bool builds = cfg.scenario != Scenario::kExactQ || cfg.index_path.empty() ||
                      !std::filesystem::exists(cfg.index_path);
  double build_seconds = 0.0;
  double output_seconds = 0.0;
  std::optional<Engine> engine;
  if (builds) {
    Stopwatch build_watch;
    engine.emplace(Engine::build(data, cfg));
    build_seconds = build_watch.seconds();
    if (!cfg.index_path.empty() && cfg.scenario != Scenario::kExactQ) {
      Stopwatch out_watch;
      engine->save(cfg.index_path);
      output_seconds = out_watch.seconds();
    }
  } else {
    Stopwatch load_watch;
    engine.emplace(Engine::load(cfg.index_path, data, cfg));
    input_seconds += load_watch.seconds();
  }

  AccessStats summary_stats = load_stats;
  double query_seconds = 0.0;
  double extrapolated = -1.0;
  double pruning_sum = 0.0, tlb_sum = 0.0, eps_sum = 0.0;
  std::size_t tlb_n = 0, eps_n = 0, queries_run = 0, tlb_leaves = 0;
  bool tlb_capped = false;
  bool all_match = true;

  if (cfg.scenario != Scenario::kIdx) {
    const Dataset queries = load_queries(cfg, data, meta.normalized);
    std::size_t n_queries = queries.count();
    if (cfg.scenario == Scenario::kIdxExtrapolate10K) {
      if (n_queries < 100) throw Error(ErrorCode::kInsufficientQueries, "Idx+Extrapolate10K needs 100 queries");
      n_queries = 100;
    }
    std::vector<double> per_query_seconds;
    for (std::size_t qi = 0; qi < n_queries; ++qi) {
      const auto query = queries.series(static_cast<SeriesId>(qi));
      Stopwatch q_watch;
      SearchResult res = engine->exact_search(query, cfg.k);
      const double q_seconds = q_watch.seconds();
      per_query_seconds.push_back(q_seconds);
      query_seconds += q_seconds;
      ++queries_run;

      Row row;
      row["row_type"] = "query";
      fill_params(row, cfg);
      row["query"] = fmt_u(qi);
      row["total_seconds"] = fmt(q_seconds * clock);
      row["cpu_seconds"] = fmt(std::max(0.0, q_seconds - res.stats.input_time - res.stats.output_time) * clock);
      row["input_seconds"] = fmt(res.stats.input_time * clock);
      row["output_seconds"] = fmt(res.stats.output_time * clock);
      fill_stats(row, res.stats);
      add_stats(summary_stats, res.stats);
      const double pr = pruning_ratio(std::min<std::uint64_t>(res.stats.series_examined, data.count()), data.count());
      pruning_sum += pr;
      row["pruning_ratio"] = fmt(pr);

      if (cfg.tlb) {
        TlbAccumulator acc;
        acc.add_query(*engine, query);
        const TlbSummary t = acc.summary();
        row["tlb_leaves"] = fmt_u(t.leaves);
        row["tlb_capped"] = t.capped ? "1" : "0";
        tlb_leaves += t.leaves;
        tlb_capped = tlb_capped || t.capped;
        if (t.leaves > 0) {
          row["tlb"] = fmt(t.mean);
          tlb_sum += t.mean;
          ++tlb_n;
        }
      }
      if (cfg.eps) {
        if (auto approx = engine->approximate_search(query, 1); approx && !approx->neighbors.empty()) {
          const double d_a = std::sqrt(approx->neighbors.front().sq_distance);
          const double d_e = std::sqrt(res.neighbors.front().sq_distance);
          if (d_e > 0.0 || d_a == 0.0) {
            const double e = effective_error(d_a, d_e);
            row["eps_eff"] = fmt(e);
            eps_sum += e;
            ++eps_n;
          }
        }
      }

      std::string ids, dists;
      for (const auto& nb : res.neighbors) {
        if (!ids.empty()) {
          ids += ';';
          dists += ';';
        }
        ids += fmt_u(nb.id);
        dists += fmt(std::sqrt(nb.sq_distance));
      }
      row["neighbor_ids"] = ids;
      row["neighbor_distances"] = dists;
      if (cfg.verify) {
        const bool ok = neighbors_match(res.neighbors, scan_knn(data, query, cfg.k).neighbors);
        all_match = all_match && ok;
        row["oracle_match"] = ok ? "1" : "0";
      }
      body += row.str();
    }
    if (cfg.scenario == Scenario::kIdxExtrapolate10K) extrapolated = extrapolate_10k(per_query_seconds);
  }

  Row row;
  row["row_type"] = "summary";
  fill_params(row, cfg);
  row["query"] = fmt_u(queries_run);
  if (builds) row["build_seconds"] = fmt(build_seconds * clock);
  double total = input_seconds + output_seconds + query_seconds;
  if (cfg.scenario != Scenario::kExactQ) total += build_seconds;
  row["total_seconds"] = fmt(total * clock);
  const double in_total = input_seconds + summary_stats.input_time;
  const double out_total = output_seconds + summary_stats.output_time;
  row["cpu_seconds"] = fmt(std::max(0.0, total - in_total - out_total) * clock);
  row["input_seconds"] = fmt(in_total * clock);
  row["output_seconds"] = fmt(out_total * clock);
  fill_stats(row, summary_stats);
  if (queries_run > 0) row["pruning_ratio"] = fmt(pruning_sum / static_cast<double>(queries_run));
  if (tlb_n > 0) row["tlb"] = fmt(tlb_sum / static_cast<double>(tlb_n));
  if (cfg.tlb && queries_run > 0) {
    row["tlb_leaves"] = fmt_u(tlb_leaves);
    row["tlb_capped"] = tlb_capped ? "1" : "0";
  }
  if (eps_n > 0) row["eps_eff"] = fmt(eps_sum / static_cast<double>(eps_n));
  if (extrapolated >= 0.0) row["extrapolated_10k_seconds"] = fmt((build_seconds + extrapolated) * clock);
  if (cfg.verify && queries_run > 0) row["oracle_match"] = all_match ? "1" : "0";
  body += row.str();

  if (verification_failed) *verification_failed = cfg.verify && !all_match;
  return body;
}

std::vector<BenchConfig> expand_sweep(const BenchConfig& base, const SweepGrid& grid) {
  auto or_base = [](auto values, auto fallback) {
    if (values.empty()) values.push_back(fallback);
    return values;
  };
  const auto methods = or_base(grid.methods, base.method);
  const auto leaves = or_base(grid.leaf_thresholds, base.leaf_threshold);
  const auto alphabets = or_base(grid.alphabets, base.alphabet);
  const auto binnings = or_base(grid.binnings, base.binning);
  const auto bits = or_base(grid.total_bits, base.total_bits);
  std::vector<BenchConfig> cells;
  for (Method m : methods) {
    for (std::size_t leaf : leaves) {
      for (std::uint32_t a : alphabets) {
        for (Binning b : binnings) {
          for (std::size_t tb : bits) {
            BenchConfig cfg = base;
            cfg.method = m;
            cfg.leaf_threshold = leaf;
            cfg.alphabet = a;
            cfg.binning = b;
            cfg.total_bits = tb;
            cells.push_back(cfg);
          }
        }
      }
    }
  }
  return cells;
}

std::string sweep(const BenchConfig& base, const SweepGrid& grid, bool* verification_failed) {
  if (verification_failed) *verification_failed = false;
  const char* tmp_env = std::getenv("SERIESCORE_TMP");
  const std::filesystem::path tmp_dir = tmp_env && *tmp_env ? tmp_env : std::filesystem::temp_directory_path().string();
  std::string body;
  std::size_t cell_no = 0;
  for (const BenchConfig& cfg : expand_sweep(base, grid)) {
    std::string templ = (tmp_dir / "seriescore-cell-XXXXXX").string();
    const int fd = ::mkstemp(templ.data());
    if (fd < 0) throw Error(ErrorCode::kIo, "cannot create temporary file in " + tmp_dir.string());
    ::close(fd);
    std::fflush(nullptr);
    const pid_t pid = ::fork();
    if (pid < 0) {
      std::filesystem::remove(templ);
      throw Error(ErrorCode::kIo, "fork failed");
    }
    if (pid == 0) {
      int code = kExitOk;
      try {
        bool failed = false;
        const std::string rows = run_scenario(cfg, &failed);
        std::ofstream out(templ, std::ios::binary | std::ios::trunc);
        out << rows;
        out.flush();
        if (!out) code = kExitData;
        else if (failed) code = kExitVerify;
      } catch (const Error& e) {
        std::fprintf(stderr, "sweep cell %zu: %s\n", cell_no, e.what());
        code = exit_code_for(e.code());
      } catch (const std::exception& e) {
        std::fprintf(stderr, "sweep cell %zu: %s\n", cell_no, e.what());
        code = 1;
      }
      std::fflush(nullptr);
      ::_exit(code);
    }
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0) {
    }
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : 1;
    std::ifstream in(templ, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    in.close();
    std::filesystem::remove(templ);
    if (code != kExitOk && code != kExitVerify) {
      throw Error(code == kExitConfig ? ErrorCode::kConfig : ErrorCode::kIo,
                  "sweep cell " + std::to_string(cell_no) + " failed with exit code " + std::to_string(code));
    }
    if (code == kExitVerify && verification_failed) *verification_failed = true;
    body += ss.str();
    ++cell_no;
  }
  return body;
}

}  // namespace seriescore
