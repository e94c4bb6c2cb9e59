#pragma once

#include <array>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>

#include "error.hpp"

namespace stune {

/// Interior extents of a 3D grid. k is the unit-stride dimension.
struct ProblemSize {
  std::int64_t i = 1;
  std::int64_t j = 1;
  std::int64_t k = 1;

  constexpr std::int64_t points() const { return i * j * k; }
  constexpr std::int64_t operator[](std::size_t axis) const {
    return axis == 0 ? i : (axis == 1 ? j : k);
  }
  friend constexpr bool operator==(const ProblemSize&, const ProblemSize&) = default;
};

/// Tile extents per dimension.
struct BlockSize {
  std::int64_t i = 1;
  std::int64_t j = 1;
  std::int64_t k = 1;

  constexpr std::int64_t operator[](std::size_t axis) const {
    return axis == 0 ? i : (axis == 1 ? j : k);
  }
  constexpr std::int64_t volume() const { return i * j * k; }
  friend constexpr bool operator==(const BlockSize&, const BlockSize&) = default;
  friend constexpr auto operator<=>(const BlockSize&, const BlockSize&) = default;
};

struct Index3 {
  std::int64_t i = 0;
  std::int64_t j = 0;
  std::int64_t k = 0;
  friend constexpr bool operator==(const Index3&, const Index3&) = default;
};

inline std::string to_string(const ProblemSize& s) {
  return std::to_string(s.i) + "x" + std::to_string(s.j) + "x" + std::to_string(s.k);
}

inline std::string to_string(const BlockSize& b) {
  return std::to_string(b.i) + "x" + std::to_string(b.j) + "x" + std::to_string(b.k);
}

inline std::ostream& operator<<(std::ostream& os, const BlockSize& b) {
  return os << to_string(b);
}

inline std::ostream& operator<<(std::ostream& os, const ProblemSize& s) {
  return os << to_string(s);
}

inline void validate(const ProblemSize& s) {
  detail::require(s.i >= 1 && s.j >= 1 && s.k >= 1,
                  "problem size " + to_string(s) + " has an extent below 1");
}

/// Rejects any b_l outside [1, S_l].
inline void validate(const BlockSize& b, const ProblemSize& s) {
  static constexpr std::array<char, 3> names{'i', 'j', 'k'};
  for (std::size_t axis = 0; axis < 3; ++axis) {
    if (b[axis] < 1 || b[axis] > s[axis]) {
      throw ContractViolation("block " + to_string(b) + " invalid for size " + to_string(s) +
                              ": b_" + names[axis] + " = " + std::to_string(b[axis]) +
                              " outside [1, " + std::to_string(s[axis]) + "]");
    }
  }
}

/// Parses the `IxJxK` literal form, e.g. "200x200x800".
inline std::array<std::int64_t, 3> parse_triple(std::string_view text) {
  std::array<std::int64_t, 3> out{};
  std::size_t pos = 0;
  for (std::size_t n = 0; n < 3; ++n) {
    const std::size_t end = n < 2 ? text.find('x', pos) : text.size();
    detail::require(end != std::string_view::npos,
                    "expected IxJxK, got '" + std::string(text) + "'");
    const auto field = text.substr(pos, end - pos);
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out[n]);
    detail::require(ec == std::errc{} && ptr == field.data() + field.size() && !field.empty(),
                    "expected IxJxK, got '" + std::string(text) + "'");
    pos = end + 1;
  }
  return out;
}

inline ProblemSize parse_size(std::string_view text) {
  const auto t = parse_triple(text);
  ProblemSize s{t[0], t[1], t[2]};
  validate(s);
  return s;
}

inline BlockSize parse_block(std::string_view text) {
  const auto t = parse_triple(text);
  return BlockSize{t[0], t[1], t[2]};
}

}  // namespace stune
