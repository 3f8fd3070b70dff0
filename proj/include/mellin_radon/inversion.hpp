#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mellin_radon/cost_model.hpp"
#include "mellin_radon/grid.hpp"
#include "mellin_radon/kernel.hpp"
#include "mellin_radon/mellin.hpp"

namespace mellin_radon {

struct InversionOptions {
  /// Working plane of the data; empty means I/2.
  std::vector<double> c;
  /// Tikhonov parameter: division by K becomes conj(K) / (|K|^2 + epsilon^2).
  double epsilon = 1e-4;
  bool taper = false;
  /// Frequencies with |xi| above this radius are dropped; 0 keeps all.
  double cutoff = 0.0;

  std::vector<double> plane(std::size_t n) const;
  void validate(std::size_t n) const;
};

struct InversionReport {
  std::string mode;
  double epsilon = 0.0;
  std::vector<double> c;
  /// Smallest |K| over the frequency lattice (K includes the kernel factor).
  double min_abs_K = 0.0;
  std::optional<double> interior_l2_error;
  /// Intervals of xi_1 + ... + xi_n where |(Mh)(alpha + i tau)| falls below
  /// the zero threshold.
  std::vector<std::pair<double, double>> flagged_zero_bands;
  double imag_residue = 0.0;

  nlohmann::json to_json() const;
};

struct InversionResult {
  GridFunction estimate;
  InversionReport report;
};

/// Slice of f on Re w = I - c from a slice of R_q f on Re z = c:
/// Gamma(s) G(z) conj(K) / (|K|^2 + eps^2), K = (M e^-q)(z), stored at w = I - z.
MellinSlice deconvolve_radon(const MellinSlice& g, const CostExpr& q, const InversionOptions& opts,
                             double* min_abs_K = nullptr);

/// The estimate lives on the reflection of the data grid (x-box = -(p-box)).
InversionResult invert_radon(const GridFunction& g, const CostExpr& q, const InversionOptions& opts = {},
                             const GridFunction* truth = nullptr);
InversionResult invert_profit(const GridFunction& pi, double p0, const CostExpr& q, const InversionOptions& opts = {},
                              const GridFunction* truth = nullptr);
InversionResult invert_kernel(const GridFunction& gh, const CostExpr& q, const KernelSpec& h,
                              const InversionOptions& opts = {}, const GridFunction* truth = nullptr);

/// Relative L2(dx) error over the central `fraction` of the log-box on every axis.
double interior_l2_error(const GridFunction& estimate, const GridFunction& truth, double fraction = 0.6);

}  // namespace mellin_radon
