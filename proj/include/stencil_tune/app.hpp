#pragma once

// Command implementations behind the stencil-tune CLI. Each command takes a
// RunConfig and returns the JSON report it persists; the CLI only parses
// flags, writes files, and prints summaries.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "candidates.hpp"
#include "counters.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "topology.hpp"
#include "tuner.hpp"

namespace stune::app {

using json = nlohmann::ordered_json;

inline constexpr const char* kToolName = "stencil-tune";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

struct RunConfig {
  std::string command = "tune";
  ProblemSize size{64, 64, 64};
  std::array<std::int64_t, 3> parts{5, 5, 5};
  std::vector<BlockSize> blocks;  // explicit candidates; overrides parts when non-empty
  int nodes = 1;
  int cores_per_node = 8;
  std::uint64_t cache_bytes = 4ull << 20;
  std::int64_t iterations = 0;  // 0 selects the mode default
  std::vector<Strategy> strategies{Strategy::mwmb};
  ExecMode mode = ExecMode::model;
  CostModelParams cost;
  std::uint64_t seed = 0;
  std::array<std::int64_t, 3> strides{16, 16, 32};
  std::int64_t offset = 15;
  int reps = 10;
  std::string input;
  std::string baseline;
};

inline std::int64_t default_iterations(ExecMode mode) { return mode == ExecMode::model ? 5 : 20; }

inline std::int64_t resolved_iterations(const RunConfig& c) {
  return c.iterations > 0 ? c.iterations : default_iterations(c.mode);
}

inline Topology topology_of(const RunConfig& c) {
  Topology t;
  t.nodes = c.nodes;
  t.cores_per_node = c.cores_per_node;
  t.shared_cache_bytes = c.cache_bytes;
  return t;
}

inline TuneOptions options_of(const RunConfig& c, std::uint64_t seed) {
  TuneOptions o;
  o.iterations = resolved_iterations(c);
  o.ctx.size = c.size;
  o.ctx.mode = c.mode;
  o.ctx.cost = c.cost;
  o.ctx.cost.cache_bytes = c.cache_bytes;
  o.shuffle_seed = seed;
  return o;
}

inline CandidateSet candidates_of(const RunConfig& c) {
  if (!c.blocks.empty()) return explicit_candidates(c.size, c.blocks);
  return generate(c.size, c.parts);
}

// ---- JSON ----------------------------------------------------------------

inline json triple(const std::array<std::int64_t, 3>& t) { return json::array({t[0], t[1], t[2]}); }

inline std::array<std::int64_t, 3> triple_from(const json& j) {
  detail::require(j.is_array() && j.size() == 3, "expected a three-element array");
  return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>(), j[2].get<std::int64_t>()};
}

inline json to_json(const RunConfig& c) {
  json strategies = json::array();
  for (auto s : c.strategies) strategies.push_back(to_string(s));
  json blocks = json::array();
  for (const auto& b : c.blocks) blocks.push_back(to_string(b));
  json j;
  j["command"] = c.command;
  j["size"] = to_string(c.size);
  j["parts"] = triple(c.parts);
  j["blocks"] = blocks;
  j["nodes"] = c.nodes;
  j["cores_per_node"] = c.cores_per_node;
  j["cache_bytes"] = c.cache_bytes;
  j["iterations"] = resolved_iterations(c);
  j["strategies"] = strategies;
  j["mode"] = to_string(c.mode);
  j["cost_model"] = {{"per_point_cost", c.cost.per_point_cost},
                     {"stride_penalty", c.cost.stride_penalty},
                     {"block_overhead", c.cost.block_overhead},
                     {"contention_exponent", c.cost.contention_exponent},
                     {"bytes_per_cell", CostModelParams::bytes_per_cell}};
  j["seed"] = c.seed;
  j["strides"] = triple(c.strides);
  j["offset"] = c.offset;
  j["reps"] = c.reps;
  j["input"] = c.input;
  j["baseline"] = c.baseline;
  return j;
}

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  c.command = j.at("command").get<std::string>();
  c.size = parse_size(j.at("size").get<std::string>());
  c.parts = triple_from(j.at("parts"));
  for (const auto& b : j.at("blocks")) c.blocks.push_back(parse_block(b.get<std::string>()));
  c.nodes = j.at("nodes").get<int>();
  c.cores_per_node = j.at("cores_per_node").get<int>();
  c.cache_bytes = j.at("cache_bytes").get<std::uint64_t>();
  c.iterations = j.at("iterations").get<std::int64_t>();
  c.strategies.clear();
  for (const auto& s : j.at("strategies")) c.strategies.push_back(parse_strategy(s.get<std::string>()));
  c.mode = parse_mode(j.at("mode").get<std::string>());
  const auto& cm = j.at("cost_model");
  c.cost.per_point_cost = cm.at("per_point_cost").get<double>();
  c.cost.stride_penalty = cm.at("stride_penalty").get<double>();
  c.cost.block_overhead = cm.at("block_overhead").get<double>();
  c.cost.contention_exponent = cm.at("contention_exponent").get<double>();
  c.cost.cache_bytes = c.cache_bytes;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.strides = triple_from(j.at("strides"));
  c.offset = j.at("offset").get<std::int64_t>();
  c.reps = j.at("reps").get<int>();
  c.input = j.at("input").get<std::string>();
  c.baseline = j.at("baseline").get<std::string>();
  return c;
}

inline json to_json(const TimingSample& s) {
  return {{"block", to_string(s.block)}, {"node", s.node_id},     {"core", s.core_id},
          {"order", s.order},            {"elapsed", s.elapsed}, {"iterations", s.iterations}};
}

inline json to_json(const TuneResult& r) {
  json samples = json::array();
  for (const auto& s : r.samples) samples.push_back(to_json(s));
  json verification = json::array();
  for (const auto& s : r.verification_samples) verification.push_back(to_json(s));
  json cores = json::array();
  for (const auto& c : r.core_choices)
    cores.push_back({{"node", c.node_id}, {"core", c.core_id}, {"block", to_string(c.block)}, {"time", c.time}});
  json nodes = json::array();
  for (const auto& n : r.node_choices)
    nodes.push_back({{"node", n.node_id},
                     {"core", n.core_id},
                     {"block", to_string(n.block)},
                     {"associated_time", n.associated_time},
                     {"mode", to_string(n.mode)}});
  json j;
  j["strategy"] = to_string(r.strategy);
  j["b_best"] = to_string(r.b_best);
  j["min_time"] = r.min_time;
  j["actual_time"] = r.actual_time;
  j["quality_pct"] = r.quality_pct;
  j["core_choices"] = cores;
  j["node_choices"] = nodes;
  j["selection_samples"] = samples;
  j["verification_samples"] = verification;
  return j;
}

// ---- report envelope -----------------------------------------------------

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline std::string affinity_note(const RunConfig& c, bool applied) {
  if (c.mode == ExecMode::model || c.command == "counters") return "not-applicable";
  return applied ? "pinned" : "no-affinity";
}

inline json envelope(const RunConfig& c, const std::string& started, bool affinity_applied) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  j["command"] = c.command;
  j["config"] = to_json(c);
  j["environment"] = {{"affinity", affinity_note(c, affinity_applied)},
                      {"pinning_disabled", pinning_disabled()},
                      {"hardware_threads", std::thread::hardware_concurrency()}};
  j["timestamps"] = {{"started", started}, {"finished", ""}};
  return j;
}

inline void finish(json& report) { report["timestamps"]["finished"] = utc_now(); }

// ---- commands ------------------------------------------------------------

inline json cmd_tune(const RunConfig& c) {
  const auto started = utc_now();
  detail::require(!c.strategies.empty(), "tune needs a strategy");
  const auto result = tune(candidates_of(c), topology_of(c), c.strategies.front(), options_of(c, c.seed));
  json report = envelope(c, started, result.affinity_applied);
  report["result"] = to_json(result);
  finish(report);
  return report;
}

inline json cmd_exhaustive(const RunConfig& c) {
  const auto started = utc_now();
  const auto lattice = exhaustive_grid(c.size, c.strides, c.offset);
  bool affinity = false;
  const auto ranked = exhaustive_search(lattice, topology_of(c), options_of(c, c.seed), &affinity);
  json report = envelope(c, started, affinity);
  json rows = json::array();
  for (std::size_t n = 0; n < ranked.size(); ++n)
    rows.push_back({{"rank", n + 1}, {"block", to_string(ranked[n].block)}, {"actual_time", ranked[n].actual_time}});
  report["lattice"] = {{"i", lattice.per_dim[0]}, {"j", lattice.per_dim[1]}, {"k", lattice.per_dim[2]},
                       {"size", lattice.size()}};
  report["ranking"] = rows;
  finish(report);
  return report;
}

struct SummaryStats {
  double best = 0.0;
  double average = 0.0;
  double worst = 0.0;
  double stddev = 0.0;  // population
};

/// One-pass (Welford) summary of repeated ActualTimes.
inline SummaryStats summarize(const std::vector<double>& times) {
  detail::require(!times.empty(), "no times to summarize");
  SummaryStats s{times.front(), 0.0, times.front(), 0.0};
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t n = 0;
  for (double t : times) {
    ++n;
    const double delta = t - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (t - mean);
    s.best = std::min(s.best, t);
    s.worst = std::max(s.worst, t);
  }
  s.average = mean;
  s.stddev = std::sqrt(std::max(0.0, m2 / static_cast<double>(n)));
  return s;
}

inline json cmd_compare(const RunConfig& c) {
  const auto started = utc_now();
  detail::require(c.reps >= 1, "repetitions must be at least 1, got " + std::to_string(c.reps));
  detail::require(!c.strategies.empty(), "compare needs at least one strategy");
  const auto candidates = candidates_of(c);
  const auto topology = topology_of(c);
  bool affinity = true;
  json table = json::array();
  for (auto strategy : c.strategies) {
    json runs = json::array();
    std::vector<double> times;
    for (int r = 0; r < c.reps; ++r) {
      const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(r);
      const auto result = tune(candidates, topology, strategy, options_of(c, seed));
      affinity = affinity && result.affinity_applied;
      times.push_back(result.actual_time);
      runs.push_back({{"seed", seed},
                      {"b_best", to_string(result.b_best)},
                      {"min_time", result.min_time},
                      {"actual_time", result.actual_time},
                      {"quality_pct", result.quality_pct}});
    }
    const auto stats = summarize(times);
    table.push_back({{"strategy", to_string(strategy)},
                     {"best", stats.best},
                     {"average", stats.average},
                     {"worst", stats.worst},
                     {"stddev", stats.stddev},
                     {"runs", runs}});
  }
  json report = envelope(c, started, affinity);
  report["comparison"] = table;
  finish(report);
  return report;
}

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json cmd_counters(const RunConfig& c) {
  const auto started = utc_now();
  std::ifstream in(c.input);
  detail::require(static_cast<bool>(in), "cannot open counter file '" + c.input + "'");
  const auto records = counters::read_csv(in);
  json report = envelope(c, started, false);
  json rows = json::array();
  for (const auto& r : records) {
    const auto d = counters::derive(r);
    json row;
    row["label"] = r.label;
    for (std::size_t n = 0; n < counters::kCounterFields.size(); ++n)
      row[std::string(counters::kCounterFields[n])] = counters::field(r, n);
    for (std::size_t n = 0; n < counters::kDerivedFields.size(); ++n)
      row[std::string(counters::kDerivedFields[n])] = counters::field(d, n);
    rows.push_back(row);
  }
  report["records"] = rows;
  if (records.size() >= 2) {
    const std::string baseline = c.baseline.empty() ? records.back().label : c.baseline;
    json cmp = json::array();
    for (const auto& d : counters::compare(records, baseline)) {
      json row;
      row["label"] = d.label;
      for (std::size_t n = 0; n < counters::kCounterFields.size(); ++n)
        row[std::string(counters::kCounterFields[n])] = optional_number(d.counters[n]);
      for (std::size_t n = 0; n < counters::kDerivedFields.size(); ++n)
        row[std::string(counters::kDerivedFields[n])] = optional_number(d.derived[n]);
      cmp.push_back(row);
    }
    report["baseline"] = baseline;
    report["comparison_pct"] = cmp;
  }
  finish(report);
  return report;
}

inline json run(const RunConfig& c) {
  if (c.command == "tune") return cmd_tune(c);
  if (c.command == "exhaustive") return cmd_exhaustive(c);
  if (c.command == "compare") return cmd_compare(c);
  if (c.command == "counters") return cmd_counters(c);
  throw ContractViolation("unknown command '" + c.command + "'");
}

/// Report without its timestamps, for reproducibility checks.
inline json without_timestamps(json report) {
  report.erase("timestamps");
  return report;
}

// ---- text output ---------------------------------------------------------

inline std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline std::string significant(double v, int digits) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

inline std::string summary_text(const json& report) {
  std::ostringstream os;
  const auto command = report.at("command").get<std::string>();
  if (command == "tune") {
    const auto& r = report.at("result");
    os << "strategy     " << r.at("strategy").get<std::string>() << "\n"
       << "b_best       " << r.at("b_best").get<std::string>() << "\n"
       << "MinTime      " << significant(r.at("min_time").get<double>(), 6) << " s\n"
       << "ActualTime   " << significant(r.at("actual_time").get<double>(), 6) << " s\n"
       << "quality_pct  " << fixed(r.at("quality_pct").get<double>(), 1) << "\n";
  } else if (command == "exhaustive") {
    const auto& rows = report.at("ranking");
    os << "lattice size " << rows.size() << "\n" << "rank  block              ActualTime\n";
    for (std::size_t n = 0; n < std::min<std::size_t>(10, rows.size()); ++n) {
      os << std::left << std::setw(6) << rows[n].at("rank").get<int>() << std::setw(19)
         << rows[n].at("block").get<std::string>() << significant(rows[n].at("actual_time").get<double>(), 6)
         << "\n";
    }
  } else if (command == "compare") {
    os << std::left << std::setw(10) << "strategy" << std::setw(14) << "best" << std::setw(14) << "average"
       << std::setw(14) << "worst" << "stddev\n";
    for (const auto& row : report.at("comparison")) {
      os << std::left << std::setw(10) << row.at("strategy").get<std::string>() << std::setw(14)
         << significant(row.at("best").get<double>(), 6) << std::setw(14)
         << significant(row.at("average").get<double>(), 6) << std::setw(14)
         << significant(row.at("worst").get<double>(), 6) << significant(row.at("stddev").get<double>(), 6) << "\n";
    }
  } else if (command == "counters") {
    os << std::left << std::setw(24) << "label" << std::setw(14) << "l2_miss_rate" << std::setw(17)
       << "bus_utilisation" << "stall_ratio\n";
    for (const auto& row : report.at("records")) {
      os << std::left << std::setw(24) << row.at("label").get<std::string>() << std::setw(14)
         << significant(row.at("l2_miss_rate").get<double>(), 4) << std::setw(17)
         << significant(row.at("bus_utilisation").get<double>(), 4)
         << significant(row.at("stall_ratio").get<double>(), 4) << "\n";
    }
    if (report.contains("comparison_pct")) {
      os << "\ndelta vs " << report.at("baseline").get<std::string>() << " (%)\n";
      for (const auto& row : report.at("comparison_pct")) {
        os << row.at("label").get<std::string>() << ":";
        for (auto name : counters::kCounterFields) {
          const auto& v = row.at(std::string(name));
          os << " " << name << "=" << (v.is_null() ? std::string("n/a") : fixed(v.get<double>(), 1));
        }
        os << "\n";
      }
    }
  }
  return os.str();
}

inline std::string csv_text(const json& report) {
  std::ostringstream os;
  const auto command = report.at("command").get<std::string>();
  if (command == "exhaustive") {
    os << "rank,block_i,block_j,block_k,actual_time\n";
    for (const auto& row : report.at("ranking")) {
      const auto b = parse_block(row.at("block").get<std::string>());
      os << row.at("rank").get<int>() << "," << b.i << "," << b.j << "," << b.k << ","
         << significant(row.at("actual_time").get<double>(), 17) << "\n";
    }
  } else if (command == "compare") {
    os << "strategy,best,average,worst,stddev\n";
    for (const auto& row : report.at("comparison"))
      os << row.at("strategy").get<std::string>() << "," << significant(row.at("best").get<double>(), 17) << ","
         << significant(row.at("average").get<double>(), 17) << "," << significant(row.at("worst").get<double>(), 17)
         << "," << significant(row.at("stddev").get<double>(), 17) << "\n";
  } else if (command == "counters") {
    os << "label,l2_miss_rate,bus_utilisation,stall_ratio\n";
    for (const auto& row : report.at("records"))
      os << row.at("label").get<std::string>() << "," << significant(row.at("l2_miss_rate").get<double>(), 4) << ","
         << significant(row.at("bus_utilisation").get<double>(), 4) << ","
         << significant(row.at("stall_ratio").get<double>(), 4) << "\n";
  } else if (command == "tune") {
    os << "block_i,block_j,block_k,node,core,order,elapsed\n";
    for (const auto& s : report.at("result").at("selection_samples")) {
      const auto b = parse_block(s.at("block").get<std::string>());
      os << b.i << "," << b.j << "," << b.k << "," << s.at("node").get<int>() << "," << s.at("core").get<int>() << ","
         << s.at("order").get<std::int64_t>() << "," << significant(s.at("elapsed").get<double>(), 17) << "\n";
    }
  }
  return os.str();
}

}  // namespace stune::app
