#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seriescore/bench.hpp"
#include "seriescore/storage.hpp"
#include "seriescore/workload.hpp"

using namespace seriescore;

namespace {

struct GenerateOptions {
  std::string out;
  std::string kind = "random-walk";
  std::string source;
  std::size_t count = 0;
  std::size_t length = 256;
  std::uint64_t seed = 1;
  bool raw = false;
  std::vector<double> noise{0.0};
};

void generate(const GenerateOptions& opt) {
  Dataset data;
  DatasetMeta meta;
  if (opt.kind == "random-walk") {
    data = gen_random_walk(WorkloadSpec{opt.count, opt.length, opt.seed, !opt.raw});
    meta.normalized = !opt.raw;
  } else if (opt.kind == "controlled") {
    if (opt.source.empty()) throw Error(ErrorCode::kConfig, "--source is required for controlled queries");
    const DatasetMeta src_meta = read_meta(default_meta_path(opt.source));
    const Dataset src = load_dataset(opt.source, src_meta, 64u << 20);
    const auto queries = gen_controlled_queries(src, opt.count, opt.noise, opt.seed);
    data = queries_to_dataset(queries);
    meta.normalized = src_meta.normalized;
    std::ofstream sources(opt.out + ".sources");
    for (const auto& q : queries) sources << q.source << ',' << q.noise << '\n';
  } else {
    throw Error(ErrorCode::kConfig, "unknown dataset kind: " + opt.kind);
  }
  meta.count = data.count();
  meta.length = data.length();
  meta.seed = opt.seed;
  write_dataset(opt.out, data);
  write_meta(default_meta_path(opt.out), meta);
}

void add_run_options(CLI::App* cmd, BenchConfig& cfg, std::string& method, std::string& scenario,
                     std::string& binning, bool& no_timing) {
  cmd->add_option("--dataset", cfg.dataset_path, "float32 dataset file")->required();
  cmd->add_option("--meta", cfg.meta_path, "metadata file (default: <data>.meta)");
  cmd->add_option("--queries", cfg.queries_path, "float32 query file (default: random walks)");
  cmd->add_option("--query-count", cfg.query_count, "queries to run")->capture_default_str();
  cmd->add_option("--seed", cfg.query_seed, "seed for generated queries")->capture_default_str();
  cmd->add_option("--index", cfg.index_path, "index file to save (Idx) or load (ExactQ)");
  cmd->add_option("--out", cfg.out_path, "CSV output (default: stdout)");
  cmd->add_option("--method", method, "scan|isax-exact|isax-sims|dstree|sfa|vafile")->capture_default_str();
  cmd->add_option("--scenario", scenario, "Idx|ExactQ|Idx+ExactQ|Idx+Extrapolate10K")->capture_default_str();
  cmd->add_option("-k,--k", cfg.k, "neighbors per query")->capture_default_str();
  cmd->add_option("--leaf", cfg.leaf_threshold, "leaf threshold")->capture_default_str();
  cmd->add_option("--segments", cfg.segments, "summary length l")->capture_default_str();
  cmd->add_option("--initial-segments", cfg.initial_segments, "DSTree initial segments")->capture_default_str();
  cmd->add_option("--alphabet", cfg.alphabet, "alphabet size (default 256 iSAX, 8 SFA)");
  cmd->add_option("--binning", binning, "equi-depth|equi-width")->capture_default_str();
  cmd->add_option("--bits", cfg.total_bits, "VA+file total bits (default 8 per coefficient)");
  cmd->add_option("--buffer", cfg.buffer_bytes, "read buffer in bytes")->capture_default_str();
  cmd->add_flag("--verify", cfg.verify, "compare every answer against a full scan");
  cmd->add_flag("--tlb", cfg.tlb, "report tightness of lower bound");
  cmd->add_flag("--eps", cfg.eps, "report effective error of approximate search");
  cmd->add_flag("--no-timing", no_timing, "write zero for timing columns");
}

void apply(BenchConfig& cfg, const std::string& method, const std::string& scenario, const std::string& binning,
           bool no_timing) {
  cfg.method = parse_method(method);
  cfg.scenario = parse_scenario(scenario);
  cfg.binning = parse_binning(binning);
  cfg.timings = !no_timing;
}

void emit(const BenchConfig& cfg, const std::string& body) {
  const std::string text = csv_header() + body;
  if (cfg.out_path.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
    std::fflush(stdout);
    return;
  }
  std::ofstream out(cfg.out_path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + cfg.out_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark harness for data-series similarity search indexes"};
  app.require_subcommand(1);

  GenerateOptions gen;
  auto* gen_cmd = app.add_subcommand("generate", "write a synthetic dataset and its metadata");
  gen_cmd->add_option("--out", gen.out, "output file")->required();
  gen_cmd->add_option("--kind", gen.kind, "random-walk|controlled")->capture_default_str();
  gen_cmd->add_option("--source", gen.source, "dataset to draw controlled queries from");
  gen_cmd->add_option("--count", gen.count, "number of series")->required();
  gen_cmd->add_option("--length", gen.length, "series length")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "random seed")->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "noise levels for controlled queries")->delimiter(',');
  gen_cmd->add_flag("--raw", gen.raw, "skip z-normalization");

  BenchConfig run_cfg;
  std::string run_method = "scan", run_scenario_name = "Idx+ExactQ", run_binning = "equi-depth";
  bool run_no_timing = false;
  auto* run_cmd = app.add_subcommand("run", "run one scenario and write CSV");
  add_run_options(run_cmd, run_cfg, run_method, run_scenario_name, run_binning, run_no_timing);

  BenchConfig sweep_cfg;
  std::string sweep_method = "scan", sweep_scenario = "Idx+ExactQ", sweep_binning = "equi-depth";
  bool sweep_no_timing = false;
  std::vector<std::string> grid_methods, grid_binnings;
  SweepGrid grid;
  auto* sweep_cmd = app.add_subcommand("sweep", "run a parameter grid, one process per cell");
  add_run_options(sweep_cmd, sweep_cfg, sweep_method, sweep_scenario, sweep_binning, sweep_no_timing);
  sweep_cmd->add_option("--methods", grid_methods, "methods to sweep")->delimiter(',');
  sweep_cmd->add_option("--leaves", grid.leaf_thresholds, "leaf thresholds to sweep")->delimiter(',');
  sweep_cmd->add_option("--alphabets", grid.alphabets, "alphabet sizes to sweep")->delimiter(',');
  sweep_cmd->add_option("--binnings", grid_binnings, "binnings to sweep")->delimiter(',');
  sweep_cmd->add_option("--bits-grid", grid.total_bits, "VA+file bit budgets to sweep")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen_cmd) {
      generate(gen);
      return kExitOk;
    }
    if (*run_cmd) {
      apply(run_cfg, run_method, run_scenario_name, run_binning, run_no_timing);
      bool failed = false;
      const std::string body = run_scenario(run_cfg, &failed);
      emit(run_cfg, body);
      return failed ? kExitVerify : kExitOk;
    }
    apply(sweep_cfg, sweep_method, sweep_scenario, sweep_binning, sweep_no_timing);
    for (const auto& m : grid_methods) grid.methods.push_back(parse_method(m));
    for (const auto& b : grid_binnings) grid.binnings.push_back(parse_binning(b));
    bool failed = false;
    const std::string body = sweep(sweep_cfg, grid, &failed);
    emit(sweep_cfg, body);
    return failed ? kExitVerify : kExitOk;
  } catch (const Error& e) {
    std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}
