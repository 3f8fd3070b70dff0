#pragma once

#include <string>
#include <vector>

#include "mellin_radon/cost_model.hpp"
#include "mellin_radon/grid.hpp"
#include "mellin_radon/kernel.hpp"

namespace mellin_radon {

enum class RadonScheme {
  /// [V(1 + d) - V(1 - d)] / (2 d) with V(t) the mass of {q_p <= t}; any n.
  VolumeDifference,
  /// Parametrize the curve q_p(x1, x2) = 1 by x1; n = 2 only.
  LevelCurve,
  /// x = r (e^u, 1): R(p) = integral of prod(v) f(v / Q) / Q^n du, Q = q_p(v); any n.
  RayChart,
};

const char* to_string(RadonScheme s);
RadonScheme radon_scheme_from_string(const std::string& name);

struct RadonOptions {
  RadonScheme scheme = RadonScheme::VolumeDifference;
  /// Finite-difference half-width; 0 selects 4x the largest q_p variation
  /// across one cell near the level set.
  double delta = 0.0;
  /// Boundary cells are split into this many parts per axis.
  int subdivisions = 8;
  bool richardson = true;
  /// Chart step (RayChart, LevelCurve) as a fraction of the grid spacing.
  double step_fraction = 1.0;
  /// Coverage: the part of the level set outside the box may carry at most
  /// this fraction of the result (plus an absolute floor scaled by max|f x|).
  double coverage_tol = 1e-3;
};

/// (R_q f)(p) = integral over {q_p = 1} of f dS / |grad q_p|.
/// Throws Coverage when the level set misses the box or leaves it where the
/// integrand is not negligible, Resolution when delta is below the grid scale.
double radon_forward(const GridFunction& f, const CostExpr& q, std::span<const double> p,
                     const RadonOptions& opts = {});

enum class CoveragePolicy { Throw, Zero };

/// R_q f on every node of a p-grid (same dimension as f).
GridFunction radon_forward_grid(const GridFunction& f, const CostExpr& q, const LogGrid& pgrid,
                                RadonOptions opts = {.scheme = RadonScheme::RayChart},
                                CoveragePolicy policy = CoveragePolicy::Zero);

enum class RhqMethod {
  /// Sum of h(q_p(x_k)) f_k over the grid.
  Direct,
  /// integral of h(t) t^-1 (R_q f)(p / t) dt on a geometric t-grid.
  Coarea,
};

struct RhqOptions {
  RhqMethod method = RhqMethod::Direct;
  int t_points = 513;
  RadonOptions radon{.scheme = RadonScheme::RayChart};
};

/// (R^h_q f)(p) = integral of h(q_p(x)) f(x) dx.
double rhq_forward(const GridFunction& f, const CostExpr& q, const KernelSpec& h,
                   std::span<const double> p, const RhqOptions& opts = {});

/// (Pi_q f)(p0, p) = integral of max{0, p0 - q_p(x)} f(x) dx, evaluated along
/// rays x = r v with the radial integral ending exactly at r = p0 / q_p(v).
double profit_forward(const GridFunction& f, const CostExpr& q, double p0, std::span<const double> p,
                      const RadonOptions& opts = {.scheme = RadonScheme::RayChart});

/// Kernel transform on a p-grid whose spacing is equal on all axes, by the
/// coarea sum over R_q f computed on the diagonally extended lattice.
/// The profit kernel is handled with its kink on a lattice node.
GridFunction rhq_forward_grid(const GridFunction& f, const CostExpr& q, const KernelSpec& h,
                              const LogGrid& pgrid, RadonOptions opts = {.scheme = RadonScheme::RayChart});
GridFunction profit_forward_grid(const GridFunction& f, const CostExpr& q, double p0, const LogGrid& pgrid,
                                 RadonOptions opts = {.scheme = RadonScheme::RayChart});

/// R_q f, Pi_q f (p0) and optionally R^h_q f on one p-grid from a single
/// diagonal batch of R_q f.
struct ForwardBatch {
  GridFunction radon;
  GridFunction profit;
  GridFunction kernel;  // empty grid when no kernel was given
};
ForwardBatch forward_batch(const GridFunction& f, const CostExpr& q, const LogGrid& pgrid,
                           const KernelSpec* h = nullptr, double p0 = 1.0);

/// Norm selector r in {1, 2, infinity}.
struct WeightedNormSpec {
  enum class R { One, Two, Inf };
  R r = R::Two;
  std::vector<double> c;
  double alpha() const;
  static R parse_r(const std::string& text);
};
const char* to_string(WeightedNormSpec::R r);

/// ||f||_{r,c}: the L^r norm of E_c f in log-coordinates (grid sum; sup over
/// nodes for r = infinity).
double weighted_norm(const GridFunction& f, const WeightedNormSpec& spec);

struct InequalityLine {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack() const { return rhs - lhs; }
  /// slack >= -tol * rhs
  bool holds(double tol) const { return slack() >= -tol * rhs; }
};

struct InequalityReport {
  WeightedNormSpec spec;
  std::vector<InequalityLine> lines;
  bool holds(double tol) const;
};

/// Checks the three norm estimates of the R_q, R^h_q and profit operators on
/// the reflected p-grid (p-box = -(f-box)). The R^h_q line is omitted when h
/// is null.
InequalityReport prop1_check(const GridFunction& f, const CostExpr& q, const KernelSpec* h,
                             WeightedNormSpec::R r, std::span<const double> c, double p0 = 1.0);

/// prop1_check for several r at once, sharing one batch of R_q f.
std::vector<InequalityReport> prop1_check_all(const GridFunction& f, const CostExpr& q, const KernelSpec* h,
                                              std::span<const double> c, double p0,
                                              std::span<const WeightedNormSpec::R> rs);

/// The p-grid used by prop1_check: same lattice as f, box reflected through 0.
LogGrid reflected_grid(const LogGrid& g);

struct CoareaOptions {
  double t_min = 0.0;  // 0: range of q_p over the box corners
  double t_max = 0.0;
  int t_points = 513;
  RadonOptions radon{.scheme = RadonScheme::RayChart};
};

/// |integral f dx - integral t^-1 (R_q f)(p / t) dt| / |integral f dx|
/// (absolute when the integral of f is zero). Throws Coverage when a given
/// t-range does not cover the q_p-values of the box.
double coarea_check(const GridFunction& f, const CostExpr& q, std::span<const double> p,
                    const CoareaOptions& opts = {});

/// Relative residual between Gamma(s) integral p^(z-I) h(q_p(x)) dp (by
/// quadrature over p) and x^-z (M e^-q)(z) (Mh)(s).
double factorization_check(const CostExpr& q, const KernelSpec& h, std::span<const double> x,
                           std::span<const cplx> z, std::size_t nodes = 1024);

/// integral of f dx over the grid.
double grid_mass(const GridFunction& f);

}  // namespace mellin_radon
