// stencil-tune: blocksize auto-tuning for cache-blocked 3D stencils.
//
//   stencil-tune tune       --size 64x64x64 --strategy mwmb
//   stencil-tune exhaustive --size 64x64x64 --strides 8x8x16 --offset 7
//   stencil-tune compare    --size 64x64x64 --strategy ob,mmmb,mwmb,mamb --reps 10
//   stencil-tune counters   data/counters_one_core.csv --baseline Efficient-Blocksize
//
// Exit status: 0 success, 2 usage error, 1 runtime error.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stencil_tune/app.hpp"

namespace {

using stune::app::json;
using stune::app::RunConfig;

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

struct Flags {
  std::string size;
  std::string parts = "5";
  std::vector<std::string> blocks;
  int nodes = 1;
  int cores_per_node = 8;
  std::uint64_t cache_bytes = 4ull << 20;
  std::int64_t iters = 0;
  std::vector<std::string> strategies;
  std::string mode = "model";
  std::uint64_t seed = 0;
  std::string out;
  std::string csv;
  std::string strides = "16x16x32";
  std::int64_t offset = 15;
  int reps = 10;
  std::string baseline;
  std::string input;
  std::string from_report;
  stune::CostModelParams cost;
};

std::array<std::int64_t, 3> parse_parts(const std::string& text) {
  if (text.find('x') == std::string::npos) {
    std::int64_t p = 0;
    std::size_t used = 0;
    try {
      p = std::stoll(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != text.size()) throw stune::ContractViolation("--parts expects P or PixPjxPk, got '" + text + "'");
    return {p, p, p};
  }
  return stune::parse_triple(text);
}

RunConfig build_config(const std::string& command, const Flags& f) {
  if (!f.from_report.empty()) {
    std::ifstream in(f.from_report);
    if (!in) throw stune::ContractViolation("cannot open report '" + f.from_report + "'");
    const json report = json::parse(in);
    RunConfig c = stune::app::config_from_json(report.at("config"));
    if (c.command != command)
      throw stune::ContractViolation("report was written by '" + c.command + "', not '" + command + "'");
    return c;
  }
  RunConfig c;
  c.command = command;
  if (command != "counters") {
    if (f.size.empty()) throw CLI::RequiredError("--size");
    c.size = stune::parse_size(f.size);
    c.parts = parse_parts(f.parts);
    for (const auto& b : f.blocks) c.blocks.push_back(stune::parse_block(b));
    c.nodes = f.nodes;
    c.cores_per_node = f.cores_per_node;
    c.cache_bytes = f.cache_bytes;
    c.iterations = f.iters;
    c.mode = stune::parse_mode(f.mode);
    c.cost = f.cost;
    c.cost.cache_bytes = f.cache_bytes;
    c.seed = f.seed;
    c.strides = stune::parse_triple(f.strides);
    c.offset = f.offset;
    c.reps = f.reps;
    c.strategies.clear();
    for (const auto& s : f.strategies) c.strategies.push_back(stune::parse_strategy(s));
    if (c.strategies.empty()) {
      if (command == "compare")
        c.strategies = {stune::Strategy::ob, stune::Strategy::mmmb, stune::Strategy::mwmb, stune::Strategy::mamb};
      else
        c.strategies = {stune::Strategy::mwmb};
    }
    if (command == "tune" && c.strategies.size() != 1)
      throw stune::ContractViolation("tune takes exactly one --strategy");
    if (c.iterations < 0) throw stune::ContractViolation("--iters must not be negative (0 selects the mode default)");
    if (c.reps < 1) throw stune::ContractViolation("--reps must be at least 1");
  } else {
    if (f.input.empty()) throw CLI::RequiredError("input");
    c.input = f.input;
    c.baseline = f.baseline;
  }
  return c;
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--size", f.size, "per-process problem size, IxJxK");
  sub->add_option("--nodes", f.nodes, "simulated nodes")->check(CLI::PositiveNumber);
  sub->add_option("--cores-per-node", f.cores_per_node, "workers per node")->check(CLI::PositiveNumber);
  sub->add_option("--cache-bytes", f.cache_bytes, "shared cache per node (model mode)")->check(CLI::PositiveNumber);
  sub->add_option("--iters", f.iters, "kernel iterations per evaluation (default 5 model, 20 real)");
  sub->add_option("--mode", f.mode, "real or model")->check(CLI::IsMember({"real", "model"}));
  sub->add_option("--seed", f.seed, "seed for OB candidate shuffling");
  sub->add_option("--out", f.out, "JSON report path");
  sub->add_option("--csv", f.csv, "optional CSV export path");
  sub->add_option("--per-point-cost", f.cost.per_point_cost, "cost model: seconds per point");
  sub->add_option("--stride-penalty", f.cost.stride_penalty, "cost model: small-b_k penalty weight");
  sub->add_option("--block-overhead", f.cost.block_overhead, "cost model: seconds per tile");
  sub->add_option("--alpha", f.cost.contention_exponent, "cost model: contention exponent");
}

void add_candidates(CLI::App* sub, Flags& f) {
  sub->add_option("--parts", f.parts, "parts per dimension, P or PixPjxPk");
  sub->add_option("--block", f.blocks, "explicit candidate block IxJxK (repeatable)");
}

void persist(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blocksize auto-tuning for cache-blocked 3D stencil kernels", "stencil-tune"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(stune::app::kToolVersion));
  Flags f;

  auto* tune = app.add_subcommand("tune", "select a blocksize with one strategy, then verify it");
  add_common(tune, f);
  add_candidates(tune, f);
  tune->add_option("--strategy", f.strategies, "ob, mmmb, mwmb or mamb")
      ->check(CLI::IsMember({"ob", "mmmb", "mwmb", "mamb"}));
  tune->add_option("--from-report", f.from_report, "re-run the configuration echoed in a report");

  auto* exhaustive = app.add_subcommand("exhaustive", "rank every block of a strided lattice");
  add_common(exhaustive, f);
  exhaustive->add_option("--strides", f.strides, "lattice strides, IxJxK");
  exhaustive->add_option("--offset", f.offset, "first lattice value per dimension");
  exhaustive->add_option("--from-report", f.from_report, "re-run the configuration echoed in a report");

  auto* compare = app.add_subcommand("compare", "repeat several strategies and summarise ActualTime");
  add_common(compare, f);
  add_candidates(compare, f);
  compare->add_option("--strategy", f.strategies, "strategies to compare (default: all four)")
      ->delimiter(',')
      ->check(CLI::IsMember({"ob", "mmmb", "mwmb", "mamb"}));
  compare->add_option("--reps", f.reps, "repetitions per strategy");
  compare->add_option("--from-report", f.from_report, "re-run the configuration echoed in a report");

  auto* counters = app.add_subcommand("counters", "derive efficiency ratios from a counter CSV");
  counters->add_option("input", f.input, "counter CSV (label first, values in millions)");
  counters->add_option("--baseline", f.baseline, "label to compare against (default: last row)");
  counters->add_option("--out", f.out, "JSON report path");
  counters->add_option("--csv", f.csv, "optional CSV export path");

  RunConfig config;
  try {
    app.parse(argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();
    config = build_config(command, f);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    std::cerr << app.help();
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return kUsageError;
  }

  try {
    const json report = stune::app::run(config);
    const std::string out = f.out.empty() ? "stencil_tune_" + config.command + ".json" : f.out;
    persist(out, report.dump(2) + "\n");
    if (!f.csv.empty()) persist(f.csv, stune::app::csv_text(report));
    std::cout << stune::app::summary_text(report);
    std::cout << "report written to " << out << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return 0;
}
