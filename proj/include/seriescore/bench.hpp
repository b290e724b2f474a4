#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seriescore/core.hpp"
#include "seriescore/discretize.hpp"

namespace seriescore {

enum class Method { kScan, kIsaxExact, kIsaxSims, kDsTree, kSfa, kVaFile };
enum class Scenario { kIdx, kExactQ, kIdxExactQ, kIdxExtrapolate10K };

const char* method_name(Method m) noexcept;
Method parse_method(std::string_view name);
const char* scenario_name(Scenario s) noexcept;
Scenario parse_scenario(std::string_view name);

struct BenchConfig {
  std::string dataset_path;
  std::string meta_path;      // defaults to <dataset>.meta
  std::string queries_path;   // empty: generate random-walk queries from query_seed
  std::string index_path;     // Idx saves here; ExactQ loads from here when present
  std::string out_path;       // empty: stdout
  Method method = Method::kScan;
  Scenario scenario = Scenario::kIdxExactQ;
  std::size_t k = 1;
  std::size_t leaf_threshold = 1000;
  std::size_t segments = 16;
  std::size_t initial_segments = 4;
  std::uint32_t alphabet = 0;  // 0: 256 for iSAX, 8 for SFA
  Binning binning = Binning::kEquiDepth;
  std::size_t total_bits = 0;  // 0: 8 bits per kept coefficient
  std::size_t buffer_bytes = 64u << 20;
  std::uint64_t query_seed = 1;
  std::size_t query_count = 100;
  bool verify = false;
  bool tlb = false;
  bool eps = false;
  bool timings = true;
};

std::uint32_t effective_alphabet(const BenchConfig& cfg) noexcept;
std::size_t effective_total_bits(const BenchConfig& cfg) noexcept;

/// One built index of any supported method behind a uniform query surface.
class Engine {
 public:
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;
  Engine(Engine&&) noexcept;
  Engine& operator=(Engine&&) noexcept;
  ~Engine();

  static Engine build(const Dataset& data, const BenchConfig& cfg);
  static Engine load(const std::string& path, const Dataset& data, const BenchConfig& cfg);
  void save(const std::string& path) const;

  Method method() const noexcept;
  SearchResult exact_search(std::span<const float> query, std::size_t k) const;
  /// Empty for methods without an ng-approximate mode (scan, VA+file).
  std::optional<SearchResult> approximate_search(std::span<const float> query, std::size_t k) const;
  /// False for the scan, which has no leaves.
  bool for_each_leaf(std::span<const float> query, const LeafVisitor& visit) const;
  const Dataset& data() const noexcept;

 private:
  struct Impl;
  explicit Engine(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

/// Fixed CSV column set; every row has exactly these fields.
const std::vector<std::string>& csv_columns();
std::string csv_header();

/// Runs one scenario and returns the CSV body (no header): one row per query
/// followed by one summary row. Sets `verification_failed` when --verify
/// finds a mismatch.
std::string run_scenario(const BenchConfig& cfg, bool* verification_failed = nullptr);

struct SweepGrid {
  std::vector<Method> methods;
  std::vector<std::size_t> leaf_thresholds;
  std::vector<std::uint32_t> alphabets;
  std::vector<Binning> binnings;
  std::vector<std::size_t> total_bits;
};

/// Cross product in a fixed order (method, leaf, alphabet, binning, bits);
/// each cell runs in a forked child so no state leaks between cells.
std::vector<BenchConfig> expand_sweep(const BenchConfig& base, const SweepGrid& grid);
std::string sweep(const BenchConfig& base, const SweepGrid& grid, bool* verification_failed = nullptr);

/// Exact-result comparison used by --verify: same length, distances equal
/// within `rel_tol` relative, and ids equal except among distance ties.
bool neighbors_match(const NeighborSet& got, const NeighborSet& expected, double rel_tol = 1e-5);

/// Process exit codes for the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitVerify = 4;
int exit_code_for(ErrorCode code) noexcept;

}  // namespace seriescore
