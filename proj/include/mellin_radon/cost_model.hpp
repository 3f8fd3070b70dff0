#pragma once

#include <cstddef>
#include <cstdint>
#include <complex>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mellin_radon {

/// Unit cost function built from CES nodes
///
///   q(x) = C (a_1 x_1^alpha + ... + a_k x_k^alpha)^(1/alpha),  alpha in (0, 1],
///
/// where each argument is either an input axis or a nested CES expression.
/// Every axis 1..n appears in exactly one leaf. Instances are immutable and
/// cheap to copy (subtrees are shared).
class CostExpr {
 public:
  struct Ces;

  /// Leaf for input axis `one_based` (1..n).
  static CostExpr axis(int one_based);

  /// CES node. Throws Error(Domain) if alpha is outside (0, 1], C <= 0, some
  /// weight is not positive, or the weights do not sum to one; throws
  /// Error(Structural) on arity mismatch or repeated axes.
  static CostExpr ces(double alpha, double C, std::vector<double> a,
                      std::vector<CostExpr> children);

  /// Parses `(ces :alpha A :C C :a (a1 ... ak) child1 ... childk)` where each
  /// child is `(axis i)` or a nested `(ces ...)`. Axes must form a permutation
  /// of 1..n with n >= 2.
  static CostExpr parse(std::string_view text);

  /// Canonical text form; parse(to_string()) reproduces the expression.
  std::string to_string() const;

  bool is_axis() const noexcept { return std::holds_alternative<int>(node_); }
  /// 0-based axis of a leaf.
  int axis_index() const;
  const Ces& node() const;

  /// Number of input axes in this (sub)expression.
  std::size_t dimension() const noexcept;

  /// Unchecked evaluation; x holds one positive value per axis of the root.
  double value(std::span<const double> x) const;
  /// q(p_1 x_1, ..., p_n x_n), unchecked.
  double value_scaled(std::span<const double> p, std::span<const double> x) const;
  /// log q(e^w) for real log-coordinates w, unchecked.
  double log_value_log(std::span<const double> w) const;
  /// Unchecked gradient written to `grad` (size n).
  void gradient(std::span<const double> x, std::span<double> grad) const;

  /// log q(e^w) for complex log-coordinates w, continued analytically through
  /// principal branches. Used by contour-deformed quadrature.
  std::complex<double> log_value_complex(std::span<const std::complex<double>> w) const;

  /// True when every node is a flat CES with alpha == 1.
  bool is_linear() const noexcept;

  /// Stable 64-bit FNV-1a hash of the canonical text.
  std::uint64_t hash() const;

 private:
  explicit CostExpr(int axis) : node_(axis) {}
  explicit CostExpr(std::shared_ptr<const Ces> n) : node_(std::move(n)) {}

  std::variant<int, std::shared_ptr<const Ces>> node_;
};

struct CostExpr::Ces {
  double alpha;
  double C;
  std::vector<double> a;
  std::vector<CostExpr> children;
  std::vector<int> axes;  // sorted 0-based axes below this node
  std::vector<double> log_a;
  double log_C = 0.0;
};

/// Throws Shape on size mismatch and Domain on non-positive coordinates.
double eval_cost(const CostExpr& q, std::span<const double> x);
std::vector<double> grad_cost(const CostExpr& q, std::span<const double> x);

/// Black-box cost function used by the extension hooks (validation of
/// arbitrary homogeneous functions).
using CostFunction = std::function<double(std::span<const double>)>;

struct ValidationReport {
  double homogeneity_max_residual = 0.0;
  bool positivity_ok = true;
  bool level_set_bounded = true;
  /// Set when boundedness follows from the CES-tree structure.
  bool analytic_bounded = false;
  /// Per-axis growth ratio q(1e200 e_i + rest) / q(1e3 e_i + rest).
  std::vector<double> ray_growth;

  bool ok(double homogeneity_tol = 1e-10) const {
    return positivity_ok && level_set_bounded && homogeneity_max_residual <= homogeneity_tol;
  }
};

ValidationReport validate_cost(const CostExpr& q, int sample_count, std::uint64_t seed = 1);
ValidationReport validate_cost(const CostFunction& q, std::size_t dimension, int sample_count,
                               std::uint64_t seed = 1);

/// Neoclassical micro production function F_0.
struct ProductionSpec {
  enum class Kind { Ces, Leontief, Linear };
  Kind kind = Kind::Linear;
  double rho = 1.0;           // Ces only: rho <= 1, rho != 0
  std::vector<double> b;      // positive weights

  /// Ces: (sum b_j y_j^rho)^(1/rho); Leontief: min_j y_j / b_j; Linear: sum b_j y_j.
  double operator()(std::span<const double> y) const;
  std::size_t dimension() const noexcept { return b.size(); }
};

struct DualityOptions {
  int grid_resolution = 0;  // simplex subdivisions; 0 picks a size-based default
  int refinement_steps = 80;
};

/// q(x) = inf { x.y / F_0(y) : y in the unit simplex } by grid search followed
/// by pairwise coordinate-descent refinement.
double cost_from_production(const ProductionSpec& F0, std::span<const double> x,
                            const DualityOptions& opts = {});

}  // namespace mellin_radon
