#pragma once

#include <string>
#include <vector>

#include "mellin_radon/gamma.hpp"

namespace mellin_radon {

/// One-dimensional kernel h(t), t > 0, used by the kernel transform
/// R^h_q f(p) = integral of h(q_p(x)) f(x) dx.
class KernelSpec {
 public:
  enum class Kind { Profit, Exponential, Sampled };

  /// h(t) = max{0, p0 - t}.
  static KernelSpec profit(double p0);
  /// h(t) = exp(-t).
  static KernelSpec exponential();
  /// Tabulated h on the nodes t_k = exp(y0 + k dy). Below the first node h is
  /// held at values.front(); above the last node it is zero.
  static KernelSpec sampled(double y0, double dy, std::vector<double> values);

  Kind kind() const noexcept { return kind_; }
  double p0() const noexcept { return p0_; }
  double y0() const noexcept { return y0_; }
  double dy() const noexcept { return dy_; }
  const std::vector<double>& samples() const noexcept { return values_; }

  double operator()(double t) const;

  /// ||h||_{1,alpha} = integral of t^(alpha-1) |h(t)| dt.
  double weighted_l1(double alpha) const;

  /// Throws Integrability when t^(alpha-1) h is not integrable for this alpha
  /// (alpha <= 0, or a tabulated kernel whose tail is cut off by its grid).
  void check_integrable(double alpha) const;

  std::string describe() const;

 private:
  Kind kind_ = Kind::Exponential;
  double p0_ = 0.0;
  double y0_ = 0.0;
  double dy_ = 0.0;
  std::vector<double> values_;
};

/// (Mh)(s) = integral_0^inf t^(s-1) h(t) dt for Re s > 0:
/// profit p0^(s+1) / (s (s+1)), exponential Gamma(s), sampled by log-grid
/// trapezoid quadrature with an analytic correction for the flat lower tail.
cplx kernel_mellin(const KernelSpec& h, cplx s);

}  // namespace mellin_radon
