#include "mellin_radon/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mellin_radon/errors.hpp"
#include "mellin_radon/gamma.hpp"
#include "mellin_radon/transforms.hpp"

namespace mellin_radon {

namespace {

constexpr double kMachineFloor = 1e-300;

enum class Mode { Radon, Profit, Kernel };

struct Divisor {
  Mode mode = Mode::Radon;
  double p0 = 1.0;
  const KernelSpec* h = nullptr;
};

// Zero bands of (Mh)(alpha + i tau) over |tau| <= tau_max.
// Bands of tau where Mh(alpha + i tau) / Gamma(alpha + i tau) nearly vanishes,
// i.e. where h carries much less information than the exponential kernel.
// Only tau where Gamma is resolvable are scanned.
std::vector<std::pair<double, double>> kernel_zero_bands(const KernelSpec& h, double alpha, double tau_max) {
  const int M = 2049;
  const double g0 = std::abs(complex_gamma(cplx(alpha, 0.0)));
  std::vector<double> mod(M, std::numeric_limits<double>::quiet_NaN()), tau(M), valid;
  for (int k = 0; k < M; ++k) {
    tau[k] = -tau_max + 2.0 * tau_max * k / (M - 1);
    const cplx s(alpha, tau[k]);
    const double gm = std::abs(complex_gamma(s));
    if (gm < 1e-8 * g0) continue;
    mod[k] = std::abs(kernel_mellin(h, s)) / gm;
    valid.push_back(mod[k]);
  }
  std::vector<std::pair<double, double>> bands;
  if (valid.empty()) return bands;
  std::nth_element(valid.begin(), valid.begin() + valid.size() / 2, valid.end());
  const double med = valid[valid.size() / 2];
  const double thr = 1e-3 * med;
  auto ratio = [&](double t) {
    const cplx s(alpha, t);
    return std::abs(kernel_mellin(h, s)) / std::abs(complex_gamma(s));
  };
  // A simple zero rarely falls on a sample, so shallow local minima are
  // refined by golden-section search before being compared with thr.
  for (int k = 1; k + 1 < M; ++k) {
    if (std::isnan(mod[k]) || std::isnan(mod[k - 1]) || std::isnan(mod[k + 1])) continue;
    if (mod[k] > mod[k - 1] || mod[k] > mod[k + 1] || mod[k] >= 0.1 * med) continue;
    double a = tau[k - 1], b = tau[k + 1];
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = ratio(c), fd = ratio(d);
    for (int it = 0; it < 60; ++it) {
      if (fc < fd) {
        b = d; d = c; fd = fc; c = b - r * (b - a); fc = ratio(c);
      } else {
        a = c; c = d; fc = fd; d = a + r * (b - a); fd = ratio(d);
      }
    }
    if (std::min(fc, fd) >= thr) continue;
    int lo = k - 1, hi = k + 1;
    while (lo > 0 && !std::isnan(mod[lo - 1]) && mod[lo] < thr) --lo;
    while (hi + 1 < M && !std::isnan(mod[hi + 1]) && mod[hi] < thr) ++hi;
    if (!bands.empty() && bands.back().second >= tau[lo]) {
      bands.back().second = tau[hi];
    } else {
      bands.emplace_back(tau[lo], tau[hi]);
    }
  }
  return bands;
}

MellinSlice deconvolve(const MellinSlice& g, const CostExpr& q, const InversionOptions& opts, const Divisor& div,
                       double* min_abs_K) {
  const std::size_t n = g.dim();
  if (q.dimension() != n) fail(ErrorKind::Shape, "cost expression dimension does not match the slice");
  opts.validate(n);
  const auto c = opts.plane(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(g.c[i] - c[i]) > 1e-12) fail(ErrorKind::Argument, "slice plane does not match the inversion plane c");
  }
  const double eps2 = opts.epsilon * opts.epsilon;
  std::vector<cplx> D(g.size());
  std::vector<double> kmin(g.size(), std::numeric_limits<double>::infinity());
  // Mh(s) / Gamma(s) depends on s only; tabulate it over the distinct Im s
  std::vector<double> taus;
  std::vector<cplx> ratio;
  if (div.mode == Mode::Kernel) {
    std::vector<cplx> z(n);
    for (std::size_t m = 0; m < g.size(); ++m) {
      g.z_at(m, z);
      double t = 0.0;
      for (auto zi : z) t += zi.imag();
      taus.push_back(t);
    }
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end(),
                           [](double a, double b) { return std::abs(a - b) <= 1e-9 * (1.0 + std::abs(a)); }),
               taus.end());
    double sigma = 0.0;
    for (double v : c) sigma += v;
    ratio.resize(taus.size());
    parallel_for(taus.size(), [&](std::size_t k) {
      const cplx sk(sigma, taus[k]);
      ratio[k] = kernel_mellin(*div.h, sk) / complex_gamma(sk);
    });
  }
  auto kernel_ratio = [&](double t) {
    auto it = std::lower_bound(taus.begin(), taus.end(), t - 1e-9 * (1.0 + std::abs(t)));
    return ratio[static_cast<std::size_t>(it - taus.begin())];
  };
  parallel_for(g.size(), [&](std::size_t m) {
    if (g.is_nyquist(m)) return;
    std::vector<cplx> z(n);
    g.z_at(m, z);
    if (opts.cutoff > 0.0) {
      double r2 = 0.0;
      for (auto zi : z) r2 += zi.imag() * zi.imag();
      if (r2 > opts.cutoff * opts.cutoff) return;
    }
    cplx s = 0.0;
    for (auto zi : z) s += zi;
    cplx K = mellin_expcost_closed(q, z);
    cplx factor;
    switch (div.mode) {
      case Mode::Radon: factor = complex_gamma(s); break;
      case Mode::Profit: factor = complex_gamma(s + 2.0) * std::exp(-(s + 1.0) * std::log(div.p0)); break;
      case Mode::Kernel: {
        // (M R^h f)(z) = Mf(I - z) K (Mh)(s) / Gamma(s); regularize that whole transfer
        factor = 1.0;
        K *= kernel_ratio(s.imag());
        break;
      }
    }
    const double a = std::abs(K);
    kmin[m] = a;
    if (eps2 == 0.0 && a < kMachineFloor) {
      std::string where = "xi = (";
      for (std::size_t i = 0; i < n; ++i) where += (i ? ", " : "") + std::to_string(z[i].imag());
      fail(ErrorKind::DivisionInstability, "|K| = " + std::to_string(a) + " below machine floor at " + where + ")");
    }
    D[m] = factor * g.values[m] * std::conj(K) / (a * a + eps2);
  });
  if (min_abs_K) *min_abs_K = *std::min_element(kmin.begin(), kmin.end());
  MellinSlice out;
  out.dy = g.dy;
  out.N = g.N;
  out.tapered = g.tapered;
  out.reflected = !g.reflected;
  out.c.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.c[i] = 1.0 - c[i];
  out.values.assign(g.size(), 0.0);
  // Mf at w = I - c + i eta sits where the data frequency is xi = -eta.
  for (std::size_t m = 0; m < g.size(); ++m) {
    const std::size_t src = g.mirror(m);
    if (src < g.size()) out.values[m] = D[src];
  }
  return out;
}

InversionResult run(const GridFunction& data, const CostExpr& q, const InversionOptions& opts, const Divisor& div,
                    const GridFunction* truth, const char* mode) {
  const LogGrid& pg = data.grid();
  pg.validate();
  const std::size_t n = pg.dim();
  if (q.is_axis()) fail(ErrorKind::Structural, "the root of a cost expression must be a CES node");
  if (q.dimension() != n) fail(ErrorKind::Shape, "cost expression dimension does not match the data grid");
  opts.validate(n);
  const auto c = opts.plane(n);
  InversionResult res;
  res.report.mode = mode;
  res.report.epsilon = opts.epsilon;
  res.report.c = c;
  const MellinSlice g = mellin_forward(data, c, opts.taper);
  const MellinSlice fs = deconvolve(g, q, opts, div, &res.report.min_abs_K);
  const LogGrid target = reflected_grid(pg);
  res.estimate = mellin_inverse(fs, target, &res.report.imag_residue);
  if (div.mode == Mode::Kernel) {
    double alpha = 0.0, tmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      alpha += c[i];
      tmax += M_PI / pg.dy[i];
    }
    res.report.flagged_zero_bands = kernel_zero_bands(*div.h, alpha, tmax);
  }
  if (truth) res.report.interior_l2_error = interior_l2_error(res.estimate, *truth);
  return res;
}

}  // namespace

std::vector<double> InversionOptions::plane(std::size_t n) const {
  return c.empty() ? std::vector<double>(n, 0.5) : c;
}

void InversionOptions::validate(std::size_t n) const {
  if (!c.empty() && c.size() != n) fail(ErrorKind::Shape, "plane c has the wrong number of entries");
  for (double v : c) {
    if (!(v > 0.0)) fail(ErrorKind::Domain, "plane c must be positive");
  }
  if (!(epsilon >= 0.0)) fail(ErrorKind::Domain, "epsilon must be nonnegative");
  if (!(cutoff >= 0.0)) fail(ErrorKind::Domain, "cutoff radius must be nonnegative");
}

nlohmann::json InversionReport::to_json() const {
  nlohmann::json j;
  j["mode"] = mode;
  j["epsilon"] = epsilon;
  j["c"] = c;
  j["min_abs_K"] = min_abs_K;
  j["interior_l2_error"] = interior_l2_error ? nlohmann::json(*interior_l2_error) : nlohmann::json(nullptr);
  auto bands = nlohmann::json::array();
  for (const auto& [a, b] : flagged_zero_bands) bands.push_back({{"tau_min", a}, {"tau_max", b}});
  j["flagged_zero_bands"] = bands;
  j["imag_residue"] = imag_residue;
  return j;
}

MellinSlice deconvolve_radon(const MellinSlice& g, const CostExpr& q, const InversionOptions& opts,
                             double* min_abs_K) {
  return deconvolve(g, q, opts, Divisor{}, min_abs_K);
}

InversionResult invert_radon(const GridFunction& g, const CostExpr& q, const InversionOptions& opts,
                             const GridFunction* truth) {
  return run(g, q, opts, Divisor{}, truth, "radon");
}

InversionResult invert_profit(const GridFunction& pi, double p0, const CostExpr& q, const InversionOptions& opts,
                              const GridFunction* truth) {
  if (!(p0 > 0.0)) fail(ErrorKind::Domain, "profit inversion requires p0 > 0");
  return run(pi, q, opts, Divisor{Mode::Profit, p0, nullptr}, truth, "profit");
}

InversionResult invert_kernel(const GridFunction& gh, const CostExpr& q, const KernelSpec& h,
                              const InversionOptions& opts, const GridFunction* truth) {
  if (h.kind() == KernelSpec::Kind::Profit) {
    auto r = invert_profit(gh, h.p0(), q, opts, truth);
    r.report.mode = "kernel";
    return r;
  }
  double alpha = 0.0;
  for (double v : opts.plane(gh.grid().dim())) alpha += v;
  h.check_integrable(alpha);
  return run(gh, q, opts, Divisor{Mode::Kernel, 1.0, &h}, truth, "kernel");
}

double interior_l2_error(const GridFunction& estimate, const GridFunction& truth, double fraction) {
  const LogGrid& g = truth.grid();
  if (!estimate.grid().same_lattice(g) || estimate.grid().y0 != g.y0) {
    fail(ErrorKind::Shape, "estimate and truth live on different grids");
  }
  const std::size_t n = g.dim();
  std::vector<std::size_t> idx(n);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    g.unravel(k, idx);
    bool inner = true;
    double e = 0.0;
    for (std::size_t i = 0; i < n && inner; ++i) {
      const double lo = 0.5 * (1.0 - fraction) * static_cast<double>(g.N[i] - 1);
      const double hi = static_cast<double>(g.N[i] - 1) - lo;
      inner = static_cast<double>(idx[i]) >= lo && static_cast<double>(idx[i]) <= hi;
      e += g.y(i, idx[i]);
    }
    if (!inner) continue;
    const double w = std::exp(e);
    num += (estimate[k] - truth[k]) * (estimate[k] - truth[k]) * w;
    den += truth[k] * truth[k] * w;
  }
  if (den == 0.0) return std::sqrt(num);
  return std::sqrt(num / den);
}

}  // namespace mellin_radon
