#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mellin_radon/cost_model.hpp"
#include "mellin_radon/diagnostics.hpp"
#include "mellin_radon/grid.hpp"
#include "mellin_radon/inversion.hpp"
#include "mellin_radon/kernel.hpp"
#include "mellin_radon/transforms.hpp"

namespace mellin_radon {

using Params = std::map<std::string, std::vector<double>>;

/// Synthetic capacity densities, product form over the axes:
///   gamma-product            x^k e^(-x / theta) / (Gamma(k + 1) theta^(k + 1))   (k, theta)
///   lognormal-bump           exp(-(log x - mu)^2 / (2 sigma^2))                   (mu, sigma)
///   power-times-exponential  x^power e^(-rate x)                                  (power, rate)
///   zero
/// Missing parameters take their defaults (k = 2, theta = 1, mu = 0, sigma = 0.5,
/// power = 0, rate = 1); a single value is broadcast to every axis.
CostFunction synthetic_family(const std::string& name, std::size_t n, const Params& params);

/// h(t) = e^-t - e e^(-e t) sampled on log t in [-30, 6]; (Mh)(s) = Gamma(s)(1 - e^(1-s)).
KernelSpec two_exponential_kernel(double dy = 0.005);

/// Scene file: `[section]` headers, `key = value` lines and `#` comments.
///
///   [cost]    expr (may span lines until parentheses balance)
///   [grid]    ymin ymax N (scalars or one value per axis)
///   [pgrid]   same keys; default is the reflection of [grid]
///   [f]       family, family parameters, or path (GridFunction CSV)
///   [kernel]  type = exponential | profit | two-exponential | csv; p0; path
///   [options] c r epsilon taper cutoff scheme coverage p0 scan_radius
///             scan_resolution kernel_scan_radius kernel_scan_resolution
struct SceneConfig {
  std::optional<CostExpr> cost;
  LogGrid grid;
  std::optional<LogGrid> pgrid;
  std::string f_family = "gamma-product";
  Params f_params;
  std::string f_path;
  std::optional<KernelSpec> kernel;
  std::vector<double> c;
  WeightedNormSpec::R r = WeightedNormSpec::R::Two;
  InversionOptions inversion;
  RadonOptions radon{.scheme = RadonScheme::RayChart};
  CoveragePolicy coverage = CoveragePolicy::Throw;
  double p0 = 1.0;
  ScanSettings scan;
  std::string base_dir;

  std::size_t dim() const;
  const CostExpr& q() const;
  LogGrid p_grid() const;
  /// Working plane (options c, else I/2).
  std::vector<double> plane() const;
  GridFunction sample_f() const;
  /// True when f comes from a synthetic family (and can serve as the truth).
  bool synthetic() const { return f_path.empty(); }

  static SceneConfig parse(const std::string& text, const std::string& base_dir = ".");
  static SceneConfig load(const std::string& path);
};

/// Text of the n = 2 demo scene (also shipped as configs/demo.scene).
const char* demo_scene_text();

/// Sampled kernel from a CSV of rows `log_t,h` on a uniform log grid.
KernelSpec load_kernel_csv(const std::string& path);

}  // namespace mellin_radon
