#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"

namespace stune {

/// Blocksize candidates: per-dimension value lists and their Cartesian
/// product in lexicographic (i, j, k) order.
struct CandidateSet {
  std::array<std::int64_t, 3> parts{};
  std::array<std::vector<std::int64_t>, 3> per_dim;
  std::vector<BlockSize> combinations;

  std::size_t size() const { return combinations.size(); }
  bool empty() const { return combinations.empty(); }
};

namespace detail {

inline std::vector<BlockSize> cartesian(const std::array<std::vector<std::int64_t>, 3>& dims) {
  std::vector<BlockSize> out;
  out.reserve(dims[0].size() * dims[1].size() * dims[2].size());
  for (auto bi : dims[0])
    for (auto bj : dims[1])
      for (auto bk : dims[2]) out.push_back({bi, bj, bk});
  return out;
}

inline void push_unique(std::vector<std::int64_t>& values, std::int64_t v) {
  if (values.empty() || values.back() != v) values.push_back(v);
}

}  // namespace detail

/// Splits each dimension into p_l parts: v_m = floor(m S_l / (p_l - 1)) + 1
/// for m = 0..p_l-1, the last value clamped to S_l, duplicates dropped.
inline CandidateSet generate(const ProblemSize& size, const std::array<std::int64_t, 3>& parts) {
  validate(size);
  CandidateSet set;
  set.parts = parts;
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const std::int64_t p = parts[axis];
    const std::int64_t s = size[axis];
    detail::require(p >= 2, "parts must be at least 2 per dimension, got " + std::to_string(p));
    detail::require(s >= p - 1, "extent " + std::to_string(s) + " too small for " +
                                    std::to_string(p) + " parts");
    auto& values = set.per_dim[axis];
    for (std::int64_t m = 0; m < p; ++m) {
      detail::push_unique(values, std::min(m * s / (p - 1) + 1, s));
    }
  }
  set.combinations = detail::cartesian(set.per_dim);
  return set;
}

inline CandidateSet generate(const ProblemSize& size, std::int64_t parts) {
  return generate(size, {parts, parts, parts});
}

/// Arithmetic lattice {offset, offset + d_l, ...} within [1, S_l], plus S_l.
/// Rejected when the progression itself has no value in range.
inline CandidateSet exhaustive_grid(const ProblemSize& size, const std::array<std::int64_t, 3>& strides,
                                    std::int64_t offset) {
  validate(size);
  CandidateSet set;
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const std::int64_t d = strides[axis];
    const std::int64_t s = size[axis];
    detail::require(d >= 1, "lattice stride must be at least 1, got " + std::to_string(d));
    auto& values = set.per_dim[axis];
    std::int64_t v = offset;
    if (v < 1) v += ((1 - v + d - 1) / d) * d;
    for (; v <= s; v += d) values.push_back(v);
    detail::require(!values.empty(), "lattice with offset " + std::to_string(offset) +
                                         " is empty for extent " + std::to_string(s));
    detail::push_unique(values, s);
  }
  set.combinations = detail::cartesian(set.per_dim);
  return set;
}

/// Wraps an explicit block list; every block must be valid for `size`.
inline CandidateSet explicit_candidates(const ProblemSize& size, std::vector<BlockSize> blocks) {
  detail::require(!blocks.empty(), "explicit candidate list is empty");
  for (const auto& b : blocks) validate(b, size);
  CandidateSet set;
  set.combinations = std::move(blocks);
  return set;
}

}  // namespace stune
