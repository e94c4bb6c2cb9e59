#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "stencil.hpp"

namespace stune {

enum class ExecMode { real, model };

inline std::string to_string(ExecMode m) { return m == ExecMode::real ? "real" : "model"; }

inline ExecMode parse_mode(const std::string& text) {
  if (text == "real") return ExecMode::real;
  if (text == "model") return ExecMode::model;
  throw ContractViolation("unknown mode '" + text + "' (expected real or model)");
}

/// N simulated nodes of uniform core count. Worker w runs on node
/// w / cores_per_node, core w % cores_per_node.
struct Topology {
  int nodes = 1;
  int cores_per_node = 1;
  std::vector<int> pinning;  // worker -> CPU id; empty means default placement
  std::uint64_t shared_cache_bytes = 4ull << 20;

  int workers() const { return nodes * cores_per_node; }
  int worker_index(int node, int core) const { return node * cores_per_node + core; }
};

inline void validate(const Topology& t) {
  detail::require(t.nodes >= 1, "topology needs at least one node");
  detail::require(t.cores_per_node >= 1, "topology needs at least one core per node");
  detail::require(t.shared_cache_bytes > 0, "shared cache capacity must be positive");
  if (!t.pinning.empty()) {
    detail::require(t.pinning.size() == static_cast<std::size_t>(t.workers()),
                    "pinning must list one CPU per worker");
    std::unordered_set<int> seen(t.pinning.begin(), t.pinning.end());
    detail::require(seen.size() == t.pinning.size(), "pinning must not map two workers to one CPU");
  }
}

/// Time of `iterations` kernel iterations for one block on one core.
struct TimingSample {
  BlockSize block;
  int node_id = 0;
  int core_id = 0;
  std::int64_t order = 0;  // position in the worker's evaluation list
  double elapsed = 0.0;
  std::int64_t iterations = 1;
};

/// Deterministic stand-in for wall-clock timing.
struct CostModelParams {
  static constexpr std::uint64_t bytes_per_cell = 8;

  double per_point_cost = 1e-9;
  double stride_penalty = 40.0;
  double block_overhead = 1e-7;
  double contention_exponent = 1.5;
  std::uint64_t cache_bytes = 4ull << 20;
};

inline void validate(const CostModelParams& p) {
  detail::require(p.per_point_cost > 0.0, "per_point_cost must be positive");
  detail::require(p.stride_penalty >= 0.0 && p.block_overhead >= 0.0 && p.contention_exponent >= 0.0,
                  "cost model weights must be non-negative");
  detail::require(p.cache_bytes > 0, "cache_bytes must be positive");
}

/// Read tile with halo plus the two written time-level tiles, in bytes.
inline constexpr std::uint64_t working_set_bytes(const BlockSize& b, std::int64_t radius = kStencilRadius) {
  const auto h = 2 * radius;
  const auto cells = (b.i + h) * (b.j + h) * (b.k + h) + 2 * b.i * b.j * b.k;
  return CostModelParams::bytes_per_cell * static_cast<std::uint64_t>(cells);
}

/// nI * [points * c * (1 + penalty / b_k) + tiles * overhead]
///    * max(1, sum(concurrent_sets) / cache)^alpha
inline double model_time(const BlockSize& block, const ProblemSize& size, std::int64_t iterations,
                         std::span<const std::uint64_t> concurrent_sets, const CostModelParams& params) {
  const std::uint64_t total = std::accumulate(concurrent_sets.begin(), concurrent_sets.end(), std::uint64_t{0});
  const double points = static_cast<double>(size.points());
  const double tiles = static_cast<double>(tile_count(size, block));
  const double sweep = points * params.per_point_cost * (1.0 + params.stride_penalty / static_cast<double>(block.k)) +
                       tiles * params.block_overhead;
  const double load = static_cast<double>(total) / static_cast<double>(params.cache_bytes);
  const double contention = std::pow(std::max(1.0, load), params.contention_exponent);
  return static_cast<double>(iterations) * sweep * contention;
}

}  // namespace stune
