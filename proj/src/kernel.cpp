#include "mellin_radon/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mellin_radon/errors.hpp"

namespace mellin_radon {

KernelSpec KernelSpec::profit(double p0) {
  if (!(p0 > 0.0)) fail(ErrorKind::Domain, "profit kernel requires p0 > 0");
  KernelSpec h;
  h.kind_ = Kind::Profit;
  h.p0_ = p0;
  return h;
}

KernelSpec KernelSpec::exponential() { return KernelSpec{}; }

KernelSpec KernelSpec::sampled(double y0, double dy, std::vector<double> values) {
  if (!(dy > 0.0) || values.size() < 4) fail(ErrorKind::Shape, "sampled kernel needs dy > 0 and at least 4 samples");
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorKind::Domain, "sampled kernel values must be finite");
  }
  KernelSpec h;
  h.kind_ = Kind::Sampled;
  h.y0_ = y0;
  h.dy_ = dy;
  h.values_ = std::move(values);
  return h;
}

double KernelSpec::operator()(double t) const {
  switch (kind_) {
    case Kind::Profit: return std::max(0.0, p0_ - t);
    case Kind::Exponential: return std::exp(-t);
    case Kind::Sampled: {
      if (!(t > 0.0)) return values_.front();
      const double u = (std::log(t) - y0_) / dy_;
      const double last = static_cast<double>(values_.size() - 1);
      if (u <= 0.0) return values_.front();
      if (u > last) return 0.0;
      long base = std::clamp(static_cast<long>(std::floor(u)) - 1, 0L, static_cast<long>(values_.size()) - 4);
      const double r = u - static_cast<double>(base);
      const double* v = values_.data() + base;
      return -(r - 1) * (r - 2) * (r - 3) / 6.0 * v[0] + r * (r - 2) * (r - 3) / 2.0 * v[1] -
             r * (r - 1) * (r - 3) / 2.0 * v[2] + r * (r - 1) * (r - 2) / 6.0 * v[3];
    }
  }
  return 0.0;
}

namespace {

// Trapezoid sum of e^{s y} h(e^y) over the sampled grid plus the flat lower tail.
cplx sampled_mellin(const KernelSpec& h, cplx s, bool absolute) {
  const auto& v = h.samples();
  const std::size_t n = v.size();
  cplx acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double y = h.y0() + static_cast<double>(k) * h.dy();
    const double w = (k == 0 || k + 1 == n) ? 0.5 : 1.0;
    acc += w * std::exp(s * y) * (absolute ? std::abs(v[k]) : v[k]);
  }
  acc *= h.dy();
  const double head = absolute ? std::abs(v.front()) : v.front();
  acc += head * std::exp(s * h.y0()) / s;
  return acc;
}

}  // namespace

double KernelSpec::weighted_l1(double alpha) const {
  check_integrable(alpha);
  switch (kind_) {
    case Kind::Profit: return std::pow(p0_, alpha + 1.0) / (alpha * (alpha + 1.0));
    case Kind::Exponential: return std::tgamma(alpha);
    case Kind::Sampled: return sampled_mellin(*this, cplx(alpha, 0.0), true).real();
  }
  return 0.0;
}

void KernelSpec::check_integrable(double alpha) const {
  if (!(alpha > 0.0)) {
    fail(ErrorKind::Integrability, "t^(alpha-1) h(t) is not integrable at t = 0 for alpha = " + std::to_string(alpha));
  }
  if (kind_ != Kind::Sampled) return;
  double peak = 0.0;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    peak = std::max(peak, std::exp(alpha * (y0_ + static_cast<double>(k) * dy_)) * std::abs(values_[k]));
  }
  const double tail = std::exp(alpha * (y0_ + static_cast<double>(values_.size() - 1) * dy_)) * std::abs(values_.back());
  if (peak > 0.0 && tail > 1e-8 * peak) {
    fail(ErrorKind::Integrability, "sampled kernel is cut off by its grid: t^alpha |h| at the last node is " +
                                       std::to_string(tail / peak) + " of its peak");
  }
}

std::string KernelSpec::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Profit: os << "profit(p0=" << p0_ << ")"; break;
    case Kind::Exponential: os << "exponential"; break;
    case Kind::Sampled: os << "sampled(y0=" << y0_ << ", dy=" << dy_ << ", N=" << values_.size() << ")"; break;
  }
  return os.str();
}

cplx kernel_mellin(const KernelSpec& h, cplx s) {
  if (!(s.real() > 0.0)) fail(ErrorKind::Domain, "kernel Mellin transform requires Re s > 0");
  switch (h.kind()) {
    case KernelSpec::Kind::Profit:
      return std::exp((s + 1.0) * std::log(h.p0())) / (s * (s + 1.0));
    case KernelSpec::Kind::Exponential:
      return complex_gamma(s);
    case KernelSpec::Kind::Sampled:
      return sampled_mellin(h, s, false);
  }
  return 0.0;
}

}  // namespace mellin_radon
