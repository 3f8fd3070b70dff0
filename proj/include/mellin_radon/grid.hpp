#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mellin_radon {

/// Tensor grid, uniform in the logarithmic coordinates y_i = log x_i.
/// Axis i carries the nodes y0[i] + k dy[i], k = 0..N[i]-1. Values are stored
/// row-major (last axis fastest).
struct LogGrid {
  std::vector<double> y0;
  std::vector<double> dy;
  std::vector<std::size_t> N;

  /// n identical axes with N nodes spanning [ymin, ymax].
  static LogGrid uniform(std::size_t n, double ymin, double ymax, std::size_t N);

  std::size_t dim() const noexcept { return N.size(); }
  std::size_t size() const noexcept;
  double y(std::size_t axis, std::size_t k) const noexcept { return y0[axis] + static_cast<double>(k) * dy[axis]; }
  double y_max(std::size_t axis) const noexcept { return y(axis, N[axis] - 1); }
  /// Product of the spacings (quadrature weight in log coordinates).
  double cell_volume() const noexcept;
  std::vector<std::size_t> strides() const;
  /// Multi-index of a flat row-major offset.
  void unravel(std::size_t flat, std::span<std::size_t> idx) const;

  /// Throws Shape unless every N_i is a power of two >= 8 and dy_i > 0.
  void validate() const;
  /// True when both grids have the same N and dy on every axis (Fourier dual
  /// grids coincide; origins may differ).
  bool same_lattice(const LogGrid& other, double rel_tol = 1e-12) const;

  bool operator==(const LogGrid&) const = default;
};

/// Real samples on a LogGrid.
class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(LogGrid grid, std::vector<double> values);
  explicit GridFunction(LogGrid grid);

  /// Samples f(x) at every node, x = exp(y).
  static GridFunction sample(const LogGrid& grid,
                             const std::function<double(std::span<const double>)>& f);

  const LogGrid& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }

  /// Tensor cubic (4-point Lagrange) interpolation in log coordinates.
  /// Returns 0 outside the covered box.
  double interpolate_log(std::span<const double> y) const;

  double max_abs() const;

  void write_csv(std::ostream& os) const;
  static GridFunction read_csv(std::istream& is);
  void save(const std::string& path) const;
  static GridFunction load(const std::string& path);

 private:
  LogGrid grid_;
  std::vector<double> values_;
};

/// Deterministic parallel loop over [0, count). The thread count comes from
/// the MELLIN_RADON_THREADS environment variable (default 1). Each index is
/// processed exactly once; callers write results to per-index slots.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);
unsigned thread_count();

}  // namespace mellin_radon
