#include "mellin_radon/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "mellin_radon/errors.hpp"
#include "mellin_radon/mellin.hpp"

namespace mellin_radon {

namespace {

// `res` cells per axis, res + 1 points, symmetric so that xi = 0 is a node for even res.
double lattice_point(double radius, std::size_t res, std::size_t k) {
  return -radius + 2.0 * radius * static_cast<double>(k) / static_cast<double>(res);
}

// Coordinate-wise golden-section descent on log|K| within one cell of xi.
double refine_minimum(const LogSymbol& log_k, std::span<const double> c, std::vector<double>& xi, double cell) {
  const std::size_t n = xi.size();
  std::vector<cplx> z(n);
  auto eval = [&](std::size_t axis, double t) {
    for (std::size_t i = 0; i < n; ++i) z[i] = cplx(c[i], i == axis ? t : xi[i]);
    return log_k(z).real();
  };
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double best = 0.0;
  for (int sweep = 0; sweep < 3; ++sweep) {
    for (std::size_t i = 0; i < n; ++i) {
      double a = xi[i] - cell, b = xi[i] + cell;
      double x1 = b - g * (b - a), x2 = a + g * (b - a);
      double f1 = eval(i, x1), f2 = eval(i, x2);
      for (int it = 0; it < 40; ++it) {
        if (f1 < f2) {
          b = x2;
          x2 = x1;
          f2 = f1;
          x1 = b - g * (b - a);
          f1 = eval(i, x1);
        } else {
          a = x1;
          x1 = x2;
          f1 = f2;
          x2 = a + g * (b - a);
          f2 = eval(i, x2);
        }
      }
      xi[i] = f1 < f2 ? x1 : x2;
      best = std::min(f1, f2);
    }
  }
  return best;
}

ZeroScanReport scan_lattice(const LogSymbol& log_k, std::span<const double> c, double radius, std::size_t resolution) {
  const std::size_t n = c.size();
  if (n == 0) fail(ErrorKind::Shape, "scan plane is empty");
  if (resolution < 16) fail(ErrorKind::Argument, "scan resolution must be at least 16 per axis");
  if (!(radius > 0.0)) fail(ErrorKind::Domain, "scan radius must be positive");
  const std::size_t pts = resolution + 1;
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= pts;
  std::vector<double> logm(total);
  parallel_for(total, [&](std::size_t k) {
    std::vector<cplx> z(n);
    std::size_t rem = k;
    for (std::size_t i = n; i-- > 0;) {
      z[i] = cplx(c[i], lattice_point(radius, resolution, rem % pts));
      rem /= pts;
    }
    logm[k] = log_k(z).real();
  });

  ZeroScanReport rep;
  rep.c.assign(c.begin(), c.end());
  rep.radius = radius;
  rep.resolution = resolution;
  auto unravel = [&](std::size_t k, std::vector<std::size_t>& idx) {
    for (std::size_t i = n; i-- > 0;) {
      idx[i] = k % pts;
      k /= pts;
    }
  };
  std::vector<std::size_t> idx(n);
  std::size_t arg = 0;
  for (std::size_t k = 0; k < total; ++k) {
    if (std::isnan(logm[k])) rep.finite = false;
    if (logm[k] < logm[arg]) arg = k;
  }
  unravel(arg, idx);
  for (std::size_t i = 0; i < n; ++i) rep.argmin.push_back(lattice_point(radius, resolution, idx[i]));
  rep.min_log_modulus = logm[arg];
  rep.min_modulus = std::exp(logm[arg]);
  std::vector<double> sorted = logm;
  std::nth_element(sorted.begin(), sorted.begin() + total / 2, sorted.end());
  rep.median_modulus = std::exp(sorted[total / 2]);
  const double log_thr = sorted[total / 2] + std::log(1e-3);
  rep.threshold = std::exp(log_thr);

  std::vector<std::size_t> stride(n, 1);
  for (std::size_t i = n; i-- > 1;) stride[i - 1] = stride[i] * pts;
  const double cell = 2.0 * radius / static_cast<double>(resolution);
  for (std::size_t k = 0; k < total; ++k) {
    unravel(k, idx);
    // zero sets may be curves in the plane, so a minimum along one axis suffices
    bool interior = true, minimum = false;
    double log_nb = -INFINITY;
    for (std::size_t i = 0; i < n && interior; ++i) {
      if (idx[i] == 0 || idx[i] + 1 == pts) {
        interior = false;
      } else if (logm[k] <= logm[k - stride[i]] && logm[k] <= logm[k + stride[i]]) {
        minimum = true;
        log_nb = std::max({log_nb, logm[k - stride[i]], logm[k + stride[i]]});
      }
    }
    if (!interior || !minimum) continue;
    ZeroCandidate cand;
    for (std::size_t i = 0; i < n; ++i) cand.xi.push_back(lattice_point(radius, resolution, idx[i]));
    double lm = logm[k];
    if (!(lm < log_thr)) {
      // a zero between nodes only shows as a shallow dip; refine it off the lattice
      lm = refine_minimum(log_k, c, cand.xi, cell);
      if (!(lm < log_thr || lm < log_nb + std::log(1e-3))) continue;
    }
    cand.modulus = std::exp(lm);
    rep.candidates.push_back(std::move(cand));
  }
  std::sort(rep.candidates.begin(), rep.candidates.end(),
            [](const ZeroCandidate& a, const ZeroCandidate& b) { return a.modulus < b.modulus; });
  if (rep.candidates.empty()) {
    rep.classification = ZeroClass::NoZeroDetected;
  } else if (static_cast<double>(rep.candidates.size()) > 0.25 * static_cast<double>(total)) {
    rep.classification = ZeroClass::ZeroRegion;
  } else {
    rep.classification = ZeroClass::IsolatedZeros;
  }
  return rep;
}

nlohmann::json r_json(WeightedNormSpec::R r) {
  if (r == WeightedNormSpec::R::Inf) return "inf";
  return r == WeightedNormSpec::R::One ? 1 : 2;
}

}  // namespace

const char* to_string(ZeroClass z) {
  switch (z) {
    case ZeroClass::NoZeroDetected: return "no-zero-detected";
    case ZeroClass::IsolatedZeros: return "isolated-zeros";
    case ZeroClass::ZeroRegion: return "zero-region";
  }
  return "?";
}

const char* to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::Radon: return "R_q";
    case OperatorKind::Kernel: return "R^h_q";
    case OperatorKind::Profit: return "Pi_q";
  }
  return "?";
}

OperatorKind operator_kind_from_string(const std::string& name) {
  if (name == "radon" || name == "R_q") return OperatorKind::Radon;
  if (name == "kernel" || name == "R^h_q") return OperatorKind::Kernel;
  if (name == "profit" || name == "Pi_q") return OperatorKind::Profit;
  fail(ErrorKind::Argument, "unknown operator '" + name + "' (expected radon, kernel or profit)");
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::InjectiveCertified: return "injective-certified";
    case Verdict::InjectiveNumerical: return "injective-numerical";
    case Verdict::NotInjectiveNumerical: return "not-injective-numerical";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

nlohmann::json ZeroScanReport::to_json() const {
  nlohmann::json j;
  j["c"] = c;
  j["radius"] = radius;
  j["resolution"] = resolution;
  j["min_modulus"] = min_modulus;
  j["min_log_modulus"] = min_log_modulus;
  j["argmin"] = argmin;
  j["median_modulus"] = median_modulus;
  j["threshold"] = threshold;
  j["threshold_rule"] = "1e-3 * median modulus";
  auto cands = nlohmann::json::array();
  for (const auto& cd : candidates) cands.push_back({{"xi", cd.xi}, {"modulus", cd.modulus}});
  j["candidates"] = cands;
  j["classification"] = to_string(classification);
  j["analytic"] = analytic;
  return j;
}

nlohmann::json InjectivityReport::to_json() const {
  nlohmann::json j;
  j["r"] = r_json(r);
  j["operator"] = to_string(op);
  j["verdict"] = to_string(verdict);
  j["cost_scan"] = cost_scan.to_json();
  j["kernel_scan"] = has_kernel_scan ? kernel_scan.to_json() : nlohmann::json(nullptr);
  return j;
}

ZeroScanReport zero_scan_symbol(const LogSymbol& log_k, std::span<const double> c, double radius,
                                std::size_t resolution) {
  return scan_lattice(log_k, c, radius, resolution);
}

ZeroScanReport zero_scan(const CostExpr& q, std::span<const double> c, double radius, std::size_t resolution) {
  if (q.is_axis()) fail(ErrorKind::Structural, "the root of a cost expression must be a CES node");
  if (c.size() != q.dimension()) fail(ErrorKind::Shape, "plane c does not match the cost dimension");
  for (double v : c) {
    if (!(v > 0.0)) fail(ErrorKind::Domain, "plane c must be positive");
  }
  auto rep = scan_lattice([&q](std::span<const cplx> z) { return log_mellin_expcost_closed(q, z); }, c, radius,
                          resolution);
  // Gamma products never vanish, so the tree's closed form is zero-free.
  rep.analytic = rep.finite;
  return rep;
}

ZeroScanReport kernel_zero_scan(const KernelSpec& h, double alpha, double radius, std::size_t resolution) {
  h.check_integrable(alpha);
  const double c[1] = {alpha};
  auto rep = scan_lattice([&h](std::span<const cplx> s) { return std::log(kernel_mellin(h, s[0])); }, c, radius,
                          resolution);
  rep.analytic = rep.finite && h.kind() != KernelSpec::Kind::Sampled;
  return rep;
}

Verdict combine_verdict(const ZeroScanReport& cost, const ZeroScanReport* kernel, WeightedNormSpec::R r) {
  if (!cost.finite || (kernel && !kernel->finite)) return Verdict::Inconclusive;
  if (cost.analytic && (!kernel || kernel->analytic)) return Verdict::InjectiveCertified;
  Verdict v = Verdict::InjectiveNumerical;
  for (const ZeroScanReport* s : {&cost, kernel}) {
    if (!s || s->analytic) continue;
    if (s->classification == ZeroClass::ZeroRegion) return Verdict::NotInjectiveNumerical;
    if (s->classification == ZeroClass::IsolatedZeros && r == WeightedNormSpec::R::Inf) {
      v = Verdict::NotInjectiveNumerical;
    }
  }
  return v;
}

InjectivityReport injectivity_report(OperatorKind op, const CostExpr& q, const KernelSpec* h,
                                     std::span<const double> c, WeightedNormSpec::R r, const ScanSettings& scan) {
  if (op == OperatorKind::Kernel && !h) fail(ErrorKind::Argument, "the R^h_q report needs a kernel");
  if (op != OperatorKind::Kernel && h) fail(ErrorKind::Argument, "a kernel is only accepted for the R^h_q report");
  InjectivityReport rep;
  rep.r = r;
  rep.op = op;
  rep.cost_scan = zero_scan(q, c, scan.radius, scan.resolution);
  if (h) {
    double alpha = 0.0;
    for (double v : c) alpha += v;
    rep.kernel_scan = kernel_zero_scan(*h, alpha, scan.kernel_radius, scan.kernel_resolution);
    rep.has_kernel_scan = true;
  }
  // Pi_q uses the profit kernel, which is zero-free, so it inherits the R_q verdict.
  rep.verdict = combine_verdict(rep.cost_scan, rep.has_kernel_scan ? &rep.kernel_scan : nullptr, r);
  return rep;
}

void write_heatmap_csv(std::ostream& os, const CostExpr& q, std::span<const double> c, double radius,
                       std::size_t resolution) {
  const std::size_t n = c.size();
  if (q.dimension() != n) fail(ErrorKind::Shape, "plane c does not match the cost dimension");
  if (resolution < 2) fail(ErrorKind::Argument, "heatmap resolution must be at least 2");
  const std::size_t pts = resolution + 1;
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= pts;
  for (std::size_t i = 0; i < n; ++i) os << "xi" << (i + 1) << ",";
  os << "modulus,log_modulus\n";
  std::vector<cplx> z(n);
  char buf[64];
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t rem = k;
    for (std::size_t i = n; i-- > 0;) {
      z[i] = cplx(c[i], lattice_point(radius, resolution, rem % pts));
      rem /= pts;
    }
    const double lm = log_mellin_expcost_closed(q, z).real();
    for (std::size_t i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,", z[i].imag());
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", std::exp(lm), lm);
    os << buf;
  }
}

}  // namespace mellin_radon
