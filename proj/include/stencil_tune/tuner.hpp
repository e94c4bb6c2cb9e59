#pragma once

// Two-phase blocksize tuning. The selection phase evaluates candidates on
// every worker; the verification phase runs the winner on all workers at
// once. OB partitions the candidates freely across workers. MMMB, MWMB and
// MAMB give every core of a node the same list in lockstep and then reduce
// in three stages: per core (min), per node (min / max / closest to the
// node mean), and across nodes (min).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "candidates.hpp"
#include "error.hpp"
#include "executor.hpp"
#include "geometry.hpp"
#include "topology.hpp"

namespace stune {

enum class Strategy { ob, mmmb, mwmb, mamb };
enum class NodeMode { min, max, avg };

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::ob: return "ob";
    case Strategy::mmmb: return "mmmb";
    case Strategy::mwmb: return "mwmb";
    case Strategy::mamb: return "mamb";
  }
  return "?";
}

inline std::string to_string(NodeMode m) {
  switch (m) {
    case NodeMode::min: return "min";
    case NodeMode::max: return "max";
    case NodeMode::avg: return "avg";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& text) {
  if (text == "ob") return Strategy::ob;
  if (text == "mmmb") return Strategy::mmmb;
  if (text == "mwmb") return Strategy::mwmb;
  if (text == "mamb") return Strategy::mamb;
  throw ContractViolation("unknown strategy '" + text + "' (expected ob, mmmb, mwmb or mamb)");
}

inline NodeMode parse_node_mode(const std::string& text) {
  if (text == "min") return NodeMode::min;
  if (text == "max") return NodeMode::max;
  if (text == "avg") return NodeMode::avg;
  throw ContractViolation("unknown node mode '" + text + "'");
}

/// Stage-2 rule of a three-stage strategy.
inline NodeMode node_mode(Strategy s) {
  switch (s) {
    case Strategy::mmmb: return NodeMode::min;
    case Strategy::mwmb: return NodeMode::max;
    case Strategy::mamb: return NodeMode::avg;
    case Strategy::ob: break;
  }
  throw ContractViolation("OB has no node-level stage");
}

struct CoreChoice {
  int node_id = 0;
  int core_id = 0;
  BlockSize block;
  double time = 0.0;
  std::int64_t order = 0;
};

struct NodeChoice {
  int node_id = 0;
  int core_id = 0;  // core whose choice was taken
  BlockSize block;
  double associated_time = 0.0;
  NodeMode mode = NodeMode::min;
};

struct Selection {
  BlockSize block;
  double min_time = 0.0;
};

struct TuneOptions {
  std::int64_t iterations = 5;
  ExecContext ctx;
  std::optional<std::uint64_t> shuffle_seed;  // OB only: permute candidates before partitioning
};

struct TuneResult {
  Strategy strategy = Strategy::mwmb;
  BlockSize b_best;
  double min_time = 0.0;
  double actual_time = 0.0;
  double quality_pct = 0.0;
  std::vector<TimingSample> samples;               // selection phase
  std::vector<TimingSample> verification_samples;  // verification phase
  std::vector<CoreChoice> core_choices;
  std::vector<NodeChoice> node_choices;
  bool affinity_applied = false;
};

struct VerifyResult {
  double actual_time = 0.0;
  std::vector<TimingSample> samples;
  bool affinity_applied = false;
};

struct RankedBlock {
  BlockSize block;
  double actual_time = 0.0;
};

/// 100 (actual - min) / min.
inline double quality_pct(double min_time, double actual_time) {
  detail::require(min_time > 0.0, "MinTime must be positive");
  return 100.0 * (actual_time - min_time) / min_time;
}

/// Fisher-Yates with a portable bounded draw, so a seed means the same
/// permutation on every standard library.
inline void seeded_shuffle(std::vector<BlockSize>& items, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t n = items.size(); n > 1; --n) {
    const std::uint64_t bound = n;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw = rng();
    while (draw >= limit) draw = rng();
    std::swap(items[n - 1], items[static_cast<std::size_t>(draw % bound)]);
  }
}

// Stage 1: per worker, the fastest sample; ties go to the earlier one.
inline std::vector<CoreChoice> stage1_core_minima(const std::vector<std::vector<TimingSample>>& by_worker) {
  std::vector<CoreChoice> out;
  out.reserve(by_worker.size());
  for (const auto& group : by_worker) {
    detail::require(!group.empty(), "stage 1 needs at least one sample per worker");
    const TimingSample* best = &group.front();
    for (const auto& s : group)
      if (s.elapsed < best->elapsed || (s.elapsed == best->elapsed && s.order < best->order)) best = &s;
    out.push_back({best->node_id, best->core_id, best->block, best->elapsed, best->order});
  }
  return out;
}

// Stage 2: one node's choice. The avg rule picks the core time nearest the
// mean over all of the node's core choices. Ties prefer the smaller time,
// then the lower core id.
inline NodeChoice stage2_node_choice(std::span<const CoreChoice> choices, NodeMode mode) {
  detail::require(!choices.empty(), "stage 2 needs at least one core choice");
  double mean = 0.0;
  for (const auto& c : choices) mean += c.time;
  mean /= static_cast<double>(choices.size());

  auto key = [&](const CoreChoice& c) {
    switch (mode) {
      case NodeMode::min: return c.time;
      case NodeMode::max: return -c.time;
      case NodeMode::avg: return std::abs(c.time - mean);
    }
    return c.time;
  };
  const CoreChoice* pick = &choices.front();
  for (const auto& c : choices) {
    const double kc = key(c);
    const double kp = key(*pick);
    if (kc < kp || (kc == kp && (c.time < pick->time || (c.time == pick->time && c.core_id < pick->core_id))))
      pick = &c;
  }
  return {pick->node_id, pick->core_id, pick->block, pick->time, mode};
}

// Stage 3: the node choice with the smallest associated time, lowest node on ties.
inline Selection stage3_global(std::span<const NodeChoice> choices) {
  detail::require(!choices.empty(), "stage 3 needs at least one node choice");
  const NodeChoice* best = &choices.front();
  for (const auto& c : choices)
    if (c.associated_time < best->associated_time ||
        (c.associated_time == best->associated_time && c.node_id < best->node_id))
      best = &c;
  return {best->block, best->associated_time};
}

/// All workers run `block` together; ActualTime is the slowest worker.
inline VerifyResult verify(const BlockSize& block, const Topology& topology, const TuneOptions& opts) {
  validate(block, opts.ctx.size);
  validate(topology);
  std::vector<std::vector<BlockSize>> assignments(static_cast<std::size_t>(topology.workers()),
                                                  std::vector<BlockSize>{block});
  auto round = execute_round(topology, assignments, opts.iterations, opts.ctx, true);
  VerifyResult out;
  out.affinity_applied = round.affinity_applied;
  for (const auto& s : round.samples) out.actual_time = std::max(out.actual_time, s.elapsed);
  out.samples = std::move(round.samples);
  return out;
}

struct ObSelection {
  Selection selection;
  std::vector<TimingSample> samples;
  bool affinity_applied = false;
};

/// Original Block: candidates dealt round-robin over all workers, no
/// barriers, global minimum wins (earliest evaluation, then lowest worker).
inline ObSelection select_ob(const CandidateSet& candidates, const Topology& topology, const TuneOptions& opts) {
  validate(topology);
  const auto workers = static_cast<std::size_t>(topology.workers());
  detail::require(candidates.size() >= workers,
                  "OB needs at least one candidate per worker (" + std::to_string(candidates.size()) +
                      " candidates, " + std::to_string(workers) + " workers)");
  std::vector<BlockSize> order = candidates.combinations;
  if (opts.shuffle_seed) seeded_shuffle(order, *opts.shuffle_seed);

  std::vector<std::vector<BlockSize>> assignments(workers);
  for (std::size_t c = 0; c < order.size(); ++c) assignments[c % workers].push_back(order[c]);

  auto round = execute_round(topology, assignments, opts.iterations, opts.ctx, false);
  const TimingSample* best = &round.samples.front();
  auto worker_of = [&](const TimingSample& s) { return topology.worker_index(s.node_id, s.core_id); };
  for (const auto& s : round.samples) {
    if (s.elapsed < best->elapsed ||
        (s.elapsed == best->elapsed &&
         (s.order < best->order || (s.order == best->order && worker_of(s) < worker_of(*best)))))
      best = &s;
  }
  ObSelection out{{best->block, best->elapsed}, std::move(round.samples), round.affinity_applied};
  return out;
}

/// Contiguous split into `nodes` lists of ceil(nC / N); trailing nodes may
/// receive fewer or none.
inline std::vector<std::vector<BlockSize>> split_by_node(const std::vector<BlockSize>& blocks, int nodes) {
  const std::size_t per = (blocks.size() + static_cast<std::size_t>(nodes) - 1) / static_cast<std::size_t>(nodes);
  std::vector<std::vector<BlockSize>> out(static_cast<std::size_t>(nodes));
  for (std::size_t c = 0; c < blocks.size(); ++c) out[c / per].push_back(blocks[c]);
  return out;
}

inline TuneResult tune(const CandidateSet& candidates, const Topology& topology, Strategy strategy,
                       const TuneOptions& opts) {
  detail::require(!candidates.empty(), "candidate set is empty");
  validate(topology);
  TuneResult result;
  result.strategy = strategy;

  if (strategy == Strategy::ob) {
    auto ob = select_ob(candidates, topology, opts);
    result.b_best = ob.selection.block;
    result.min_time = ob.selection.min_time;
    result.samples = std::move(ob.samples);
    result.affinity_applied = ob.affinity_applied;
  } else {
    const auto node_lists = split_by_node(candidates.combinations, topology.nodes);
    std::vector<std::vector<BlockSize>> assignments;
    for (int node = 0; node < topology.nodes; ++node)
      for (int core = 0; core < topology.cores_per_node; ++core)
        assignments.push_back(node_lists[static_cast<std::size_t>(node)]);
    auto round = execute_round(topology, assignments, opts.iterations, opts.ctx, true);
    result.affinity_applied = round.affinity_applied;

    std::map<std::pair<int, int>, std::vector<TimingSample>> grouped;
    for (const auto& s : round.samples) grouped[{s.node_id, s.core_id}].push_back(s);
    std::vector<std::vector<TimingSample>> by_worker;
    for (auto& [_, group] : grouped) by_worker.push_back(std::move(group));
    result.core_choices = stage1_core_minima(by_worker);

    const NodeMode mode = node_mode(strategy);
    for (int node = 0; node < topology.nodes; ++node) {
      std::vector<CoreChoice> mine;
      for (const auto& c : result.core_choices)
        if (c.node_id == node) mine.push_back(c);
      if (!mine.empty()) result.node_choices.push_back(stage2_node_choice(mine, mode));
    }
    const auto sel = stage3_global(result.node_choices);
    result.b_best = sel.block;
    result.min_time = sel.min_time;
    result.samples = std::move(round.samples);
  }

  auto check = verify(result.b_best, topology, opts);
  result.actual_time = check.actual_time;
  result.verification_samples = std::move(check.samples);
  result.affinity_applied = result.affinity_applied && check.affinity_applied;
  result.quality_pct = quality_pct(result.min_time, result.actual_time);
  return result;
}

/// Verification-style run of every lattice block, ascending by ActualTime
/// (lattice order on ties).
inline std::vector<RankedBlock> exhaustive_search(const CandidateSet& lattice, const Topology& topology,
                                                  const TuneOptions& opts, bool* affinity_applied = nullptr) {
  detail::require(!lattice.empty(), "lattice is empty");
  std::vector<RankedBlock> ranked;
  ranked.reserve(lattice.size());
  bool pinned = true;
  for (const auto& b : lattice.combinations) {
    const auto v = verify(b, topology, opts);
    pinned = pinned && v.affinity_applied;
    ranked.push_back({b, v.actual_time});
  }
  if (affinity_applied != nullptr) *affinity_applied = pinned;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedBlock& a, const RankedBlock& b) { return a.actual_time < b.actual_time; });
  return ranked;
}

}  // namespace stune
