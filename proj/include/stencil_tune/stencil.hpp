#pragma once

// 3D acoustic wave-equation stencil, 10th order in space and 2nd order in
// time, with untiled and tiled traversals.
//
// Each interior point is updated by
//   u_next = 2 u_curr - u_prev + (v dt / dx)^2 * L10(u_curr)
// where L10 sums the per-axis 10th-order central second-difference
// coefficients over offsets -5..+5. The summation order inside a point is
// fixed (axis i, then j, then k; offsets ascending), so the traversal order
// never changes the result.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"

namespace stune {

inline constexpr int kStencilRadius = 5;

/// Coefficients c_0..c_5 of the 10th-order second derivative, per axis.
inline constexpr std::array<double, kStencilRadius + 1> kLaplacianCoefficients{
    -5269.0 / 1800.0, 5.0 / 3.0, -5.0 / 21.0, 5.0 / 126.0, -5.0 / 1008.0, 1.0 / 3150.0};

/// Point source driven by a Ricker wavelet.
struct SourceTerm {
  Index3 location;
  double peak_frequency = 0.25;
  double scale = 1.0;

  /// Wavelet value at time step t, for time step dt. Peaks at t*dt = 1/f.
  double amplitude(std::int64_t t, double dt) const {
    const double tau = static_cast<double>(t) * dt - 1.0 / peak_frequency;
    const double a = std::numbers::pi * peak_frequency * tau;
    return scale * (1.0 - 2.0 * a * a) * std::exp(-a * a);
  }
};

/// Two-time-level field with a zero halo of width kStencilRadius.
class Grid3D {
public:
  static constexpr int radius = kStencilRadius;

  explicit Grid3D(ProblemSize size, double dt = 0.1, double dx = 1.0, double velocity = 1.0)
      : size_(size), dt_(dt), dx_(dx), velocity_(velocity) {
    validate(size);
    detail::require(dt > 0.0 && dx > 0.0, "dt and dx must be positive");
    ext_j_ = size.j + 2 * radius;
    ext_k_ = size.k + 2 * radius;
    const auto total = static_cast<std::size_t>((size.i + 2 * radius) * ext_j_ * ext_k_);
    curr_.assign(total, 0.0);
    prev_.assign(total, 0.0);
  }

  const ProblemSize& size() const { return size_; }
  double dt() const { return dt_; }
  double dx() const { return dx_; }

  /// Replaces the constant velocity by a per-cell field of interior extent,
  /// i-major with k contiguous.
  void set_velocity_field(std::span<const double> interior) {
    detail::require(interior.size() == static_cast<std::size_t>(size_.points()),
                    "velocity field size does not match the interior");
    velocity_field_.assign(curr_.size(), 0.0);
    std::size_t n = 0;
    for (std::int64_t i = 0; i < size_.i; ++i)
      for (std::int64_t j = 0; j < size_.j; ++j)
        for (std::int64_t k = 0; k < size_.k; ++k) velocity_field_[offset(i, j, k)] = interior[n++];
  }

  /// Interior coordinates; the halo is reachable with indices in [-radius, 0).
  std::size_t offset(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return static_cast<std::size_t>(((i + radius) * ext_j_ + (j + radius)) * ext_k_ + (k + radius));
  }

  double& curr(std::int64_t i, std::int64_t j, std::int64_t k) { return curr_[offset(i, j, k)]; }
  double curr(std::int64_t i, std::int64_t j, std::int64_t k) const { return curr_[offset(i, j, k)]; }
  double& prev(std::int64_t i, std::int64_t j, std::int64_t k) { return prev_[offset(i, j, k)]; }
  double prev(std::int64_t i, std::int64_t j, std::int64_t k) const { return prev_[offset(i, j, k)]; }

  std::span<const double> current() const { return curr_; }
  std::span<const double> previous() const { return prev_; }

  double max_abs() const {
    double m = 0.0;
    for (double v : curr_) m = std::max(m, std::abs(v));
    return m;
  }

  /// Updates interior points in [i0,i1) x [j0,j1) x [k0,k1), writing the new
  /// time level over u_prev. Call rotate() once the whole interior is done.
  void update_range(std::int64_t i0, std::int64_t i1, std::int64_t j0, std::int64_t j1,
                    std::int64_t k0, std::int64_t k1) {
    const std::int64_t sj = ext_k_;
    const std::int64_t si = ext_j_ * ext_k_;
    const double courant2 = (dt_ * dt_) / (dx_ * dx_);
    const double uniform = velocity_ * velocity_ * courant2;
    const double* u = curr_.data();
    double* out = prev_.data();
    const bool has_field = !velocity_field_.empty();
    for (std::int64_t i = i0; i < i1; ++i) {
      for (std::int64_t j = j0; j < j1; ++j) {
        const std::size_t row = offset(i, j, 0);
        for (std::int64_t k = k0; k < k1; ++k) {
          const std::size_t p = row + static_cast<std::size_t>(k);
          double factor = uniform;
          if (has_field) {
            const double v = velocity_field_[p];
            factor = v * v * courant2;
          }
          out[p] = 2.0 * u[p] - out[p] + factor * laplacian(u, p, si, sj);
        }
      }
    }
  }

  void rotate() { std::swap(curr_, prev_); }

  /// Adds the source wavelet to the current level. Call after rotate().
  void inject(const SourceTerm& source, std::int64_t t) {
    curr(source.location.i, source.location.j, source.location.k) +=
        source.amplitude(t, dt_) * dt_ * dt_;
  }

private:
  static double laplacian(const double* u, std::size_t p, std::int64_t si, std::int64_t sj) {
    const auto& c = kLaplacianCoefficients;
    double acc = 0.0;
    for (std::int64_t stride : {si, sj, std::int64_t{1}}) {
      for (int o = -radius; o <= radius; ++o) {
        acc += c[static_cast<std::size_t>(o < 0 ? -o : o)] *
               u[static_cast<std::int64_t>(p) + o * stride];
      }
    }
    return acc;
  }

  ProblemSize size_;
  double dt_;
  double dx_;
  double velocity_;
  std::int64_t ext_j_ = 0;
  std::int64_t ext_k_ = 0;
  std::vector<double> curr_;
  std::vector<double> prev_;
  std::vector<double> velocity_field_;
};

inline void validate(const SourceTerm& source, const ProblemSize& size) {
  const auto& l = source.location;
  detail::require(l.i >= 0 && l.i < size.i && l.j >= 0 && l.j < size.j && l.k >= 0 && l.k < size.k,
                  "source location lies outside the interior of " + to_string(size));
}

/// Calls visit(i0, i1, j0, j1, k0, k1) for every tile, i outer, k inner.
/// The last tile along each axis is truncated at the boundary.
template <class Visit>
void for_each_tile(const ProblemSize& size, const BlockSize& block, Visit&& visit) {
  for (std::int64_t ii = 0; ii < size.i; ii += block.i) {
    const std::int64_t ie = std::min(ii + block.i, size.i);
    for (std::int64_t jj = 0; jj < size.j; jj += block.j) {
      const std::int64_t je = std::min(jj + block.j, size.j);
      for (std::int64_t kk = 0; kk < size.k; kk += block.k) {
        const std::int64_t ke = std::min(kk + block.k, size.k);
        visit(ii, ie, jj, je, kk, ke);
      }
    }
  }
}

/// Number of tiles visited per sweep.
inline std::int64_t tile_count(const ProblemSize& size, const BlockSize& block) {
  auto ceil_div = [](std::int64_t a, std::int64_t b) { return (a + b - 1) / b; };
  return ceil_div(size.i, block.i) * ceil_div(size.j, block.j) * ceil_div(size.k, block.k);
}

inline void step_untiled(Grid3D& grid, const std::optional<SourceTerm>& source, std::int64_t t) {
  const auto& s = grid.size();
  if (source) validate(*source, s);
  for (std::int64_t i = 0; i < s.i; ++i) grid.update_range(i, i + 1, 0, s.j, 0, s.k);
  grid.rotate();
  if (source) grid.inject(*source, t);
}

inline void step_tiled(Grid3D& grid, const BlockSize& block, const std::optional<SourceTerm>& source,
                       std::int64_t t) {
  validate(block, grid.size());
  if (source) validate(*source, grid.size());
  for_each_tile(grid.size(), block,
                [&](std::int64_t i0, std::int64_t i1, std::int64_t j0, std::int64_t j1,
                    std::int64_t k0, std::int64_t k1) { grid.update_range(i0, i1, j0, j1, k0, k1); });
  grid.rotate();
  if (source) grid.inject(*source, t);
}

/// Runs `iterations` tiled steps starting at time step `first_step` and
/// returns the elapsed wall-clock seconds of the loop alone.
inline double run_iterations(Grid3D& grid, const BlockSize& block, std::int64_t iterations,
                             const std::optional<SourceTerm>& source = std::nullopt,
                             std::int64_t first_step = 0) {
  detail::require(iterations >= 1, "iteration count must be at least 1");
  validate(block, grid.size());
  if (source) validate(*source, grid.size());
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  for (std::int64_t n = 0; n < iterations; ++n) step_tiled(grid, block, source, first_step + n);
  const auto stop = Clock::now();
  const double seconds = std::chrono::duration<double>(stop - start).count();
  // Clock granularity floor: a non-empty sweep always takes some time.
  return std::max(seconds, 1e-9);
}

}  // namespace stune
