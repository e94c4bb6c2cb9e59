#pragma once

// Runs one evaluation round across a simulated multi-node topology, either
// timing the real kernel on pinned threads or evaluating the cost model.

#include <algorithm>
#include <barrier>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#ifdef __linux__
#include <pthread.h>
#include <sched.h>
#endif

#include "error.hpp"
#include "geometry.hpp"
#include "stencil.hpp"
#include "topology.hpp"

namespace stune {

/// Everything a round needs besides the topology and the assignments.
struct ExecContext {
  ProblemSize size;  // per-process problem size
  ExecMode mode = ExecMode::model;
  CostModelParams cost;  // model mode; cache_bytes is taken from the topology
  double dt = 0.1;
  double dx = 1.0;
  double velocity = 1.0;
};

struct RoundResult {
  std::vector<TimingSample> samples;  // worker-major, evaluation order within a worker
  bool affinity_applied = false;      // real mode: every worker was pinned
};

inline bool pinning_disabled() {
  const char* v = std::getenv("STENCIL_TUNE_NO_PIN");
  return v != nullptr && std::string(v) == "1";
}

/// Best-effort pin of the calling thread. Returns false when unsupported.
inline bool pin_current_thread(int cpu) {
#ifdef __linux__
  if (cpu < 0 || cpu >= CPU_SETSIZE) return false;
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(cpu, &set);
  return pthread_setaffinity_np(pthread_self(), sizeof(set), &set) == 0;
#else
  (void)cpu;
  return false;
#endif
}

namespace detail {

inline void check_assignments(const Topology& topology, const std::vector<std::vector<BlockSize>>& assignments,
                              const ProblemSize& size, bool lockstep) {
  validate(topology);
  require(assignments.size() == static_cast<std::size_t>(topology.workers()),
          "expected " + std::to_string(topology.workers()) + " assignment lists, got " +
              std::to_string(assignments.size()));
  for (const auto& list : assignments)
    for (const auto& b : list) validate(b, size);
  if (!lockstep) return;
  for (int node = 0; node < topology.nodes; ++node) {
    const auto& first = assignments[static_cast<std::size_t>(topology.worker_index(node, 0))];
    for (int core = 1; core < topology.cores_per_node; ++core) {
      const auto& list = assignments[static_cast<std::size_t>(topology.worker_index(node, core))];
      require(list.size() == first.size(),
              "lockstep needs equal-length lists on node " + std::to_string(node) + " (core 0 has " +
                  std::to_string(first.size()) + ", core " + std::to_string(core) + " has " +
                  std::to_string(list.size()) + ")");
    }
  }
}

// Co-residency is index-aligned: a worker's s-th evaluation shares the
// node's cache with the s-th evaluation of every same-node worker that has
// one. With a barrier per candidate this is exact; without one it is the
// model's reading of "run at the same time".
inline RoundResult execute_model(const Topology& topology, const std::vector<std::vector<BlockSize>>& assignments,
                                 std::int64_t iterations, const ExecContext& ctx) {
  CostModelParams params = ctx.cost;
  params.cache_bytes = topology.shared_cache_bytes;
  validate(params);

  RoundResult result;
  std::vector<std::vector<TimingSample>> per_worker(assignments.size());
  std::vector<std::uint64_t> sets;
  for (int node = 0; node < topology.nodes; ++node) {
    std::size_t steps = 0;
    for (int core = 0; core < topology.cores_per_node; ++core)
      steps = std::max(steps, assignments[static_cast<std::size_t>(topology.worker_index(node, core))].size());
    for (std::size_t s = 0; s < steps; ++s) {
      sets.clear();
      for (int core = 0; core < topology.cores_per_node; ++core) {
        const auto& list = assignments[static_cast<std::size_t>(topology.worker_index(node, core))];
        if (s < list.size()) sets.push_back(working_set_bytes(list[s]));
      }
      for (int core = 0; core < topology.cores_per_node; ++core) {
        const auto w = static_cast<std::size_t>(topology.worker_index(node, core));
        const auto& list = assignments[w];
        if (s >= list.size()) continue;
        per_worker[w].push_back({list[s], node, core, static_cast<std::int64_t>(s),
                                 model_time(list[s], ctx.size, iterations, sets, params), iterations});
      }
    }
  }
  for (auto& v : per_worker) result.samples.insert(result.samples.end(), v.begin(), v.end());
  return result;
}

inline RoundResult execute_real(const Topology& topology, const std::vector<std::vector<BlockSize>>& assignments,
                                std::int64_t iterations, const ExecContext& ctx, bool lockstep) {
  const int n = topology.workers();
  std::vector<std::unique_ptr<std::barrier<>>> node_barriers;
  for (int node = 0; node < topology.nodes; ++node)
    node_barriers.push_back(std::make_unique<std::barrier<>>(topology.cores_per_node));

  const bool want_pin = !pinning_disabled();
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::vector<TimingSample>> per_worker(static_cast<std::size_t>(n));
  std::vector<char> pinned(static_cast<std::size_t>(n), 0);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));

  auto work = [&](int w) {
    const int node = w / topology.cores_per_node;
    const int core = w % topology.cores_per_node;
    const auto& list = assignments[static_cast<std::size_t>(w)];
    auto& out = per_worker[static_cast<std::size_t>(w)];
    try {
      if (want_pin) {
        const int cpu = topology.pinning.empty() ? static_cast<int>(static_cast<unsigned>(w) % hw)
                                                 : topology.pinning[static_cast<std::size_t>(w)];
        pinned[static_cast<std::size_t>(w)] = pin_current_thread(cpu) ? 1 : 0;
      }
      Grid3D grid(ctx.size, ctx.dt, ctx.dx, ctx.velocity);
      const SourceTerm source{{ctx.size.i / 2, ctx.size.j / 2, ctx.size.k / 2}};
      out.reserve(list.size());
      std::int64_t t = 0;
      for (std::size_t s = 0; s < list.size(); ++s) {
        if (lockstep) node_barriers[static_cast<std::size_t>(node)]->arrive_and_wait();
        const double elapsed = run_iterations(grid, list[s], iterations, source, t);
        t += iterations;
        out.push_back({list[s], node, core, static_cast<std::int64_t>(s), elapsed, iterations});
      }
    } catch (...) {
      errors[static_cast<std::size_t>(w)] = std::current_exception();
      if (lockstep) node_barriers[static_cast<std::size_t>(node)]->arrive_and_drop();
    }
  };

  {
    std::vector<std::jthread> threads;
    threads.reserve(static_cast<std::size_t>(n));
    for (int w = 0; w < n; ++w) threads.emplace_back(work, w);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  RoundResult result;
  result.affinity_applied = want_pin;
  for (char p : pinned) result.affinity_applied = result.affinity_applied && p != 0;
  for (auto& v : per_worker) result.samples.insert(result.samples.end(), v.begin(), v.end());
  return result;
}

}  // namespace detail

/// Evaluates each worker's list in order and returns one sample per
/// (worker, candidate). `assignments` is indexed by worker (node-major).
/// In lockstep mode a per-node barrier separates consecutive candidates.
inline RoundResult execute_round(const Topology& topology, const std::vector<std::vector<BlockSize>>& assignments,
                                 std::int64_t iterations, const ExecContext& ctx, bool lockstep) {
  detail::require(iterations >= 1, "iteration count must be at least 1");
  detail::check_assignments(topology, assignments, ctx.size, lockstep);
  if (ctx.mode == ExecMode::model) return detail::execute_model(topology, assignments, iterations, ctx);
  return detail::execute_real(topology, assignments, iterations, ctx, lockstep);
}

}  // namespace stune
