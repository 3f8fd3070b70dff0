#include "mellin_radon/transforms.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <functional>
#include <sstream>

#include "mellin_radon/errors.hpp"
#include "mellin_radon/mellin.hpp"

namespace mellin_radon {

namespace {

// Gauss-Legendre nodes and weights on [-1, 1].
constexpr std::array<double, 4> kGl4x{-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
constexpr std::array<double, 4> kGl4w{0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
constexpr std::array<double, 8> kGl8x{-0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
                                      0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGl8w{0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
                                      0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

std::string format_point(std::span<const double> p) {
  std::ostringstream os;
  os.precision(6);
  os << "p = (";
  for (std::size_t i = 0; i < p.size(); ++i) os << (i ? ", " : "") << p[i];
  os << ")";
  return os.str();
}

void check_inputs(const GridFunction& f, const CostExpr& q, std::span<const double> p) {
  const std::size_t n = f.grid().dim();
  if (q.is_axis()) fail(ErrorKind::Structural, "the root of a cost expression must be a CES node");
  if (q.dimension() != n) fail(ErrorKind::Shape, "cost expression has " + std::to_string(q.dimension()) + " axes, grid has " + std::to_string(n));
  if (p.size() != n) fail(ErrorKind::Shape, "price vector has " + std::to_string(p.size()) + " entries, grid has " + std::to_string(n) + " axes");
  for (double v : p) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorKind::Domain, "prices must be positive and finite");
  }
}

// max |f x^I| over the grid; scale of the chart density f(x) prod(x).
double density_scale(const GridFunction& f) {
  const LogGrid& g = f.grid();
  std::vector<std::size_t> idx(g.dim());
  double m = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (f[k] == 0.0) continue;
    g.unravel(k, idx);
    double e = 0.0;
    for (std::size_t i = 0; i < g.dim(); ++i) e += g.y(i, idx[i]);
    m = std::max(m, std::abs(f[k]) * std::exp(e));
  }
  return m;
}

constexpr double kFloorFactor = 1e-10;

bool inside_box(const LogGrid& g, std::span<const double> y) {
  for (std::size_t i = 0; i < g.dim(); ++i) {
    const double tol = 1e-9 * g.dy[i];
    if (y[i] < g.y0[i] - tol || y[i] > g.y_max(i) + tol) return false;
  }
  return true;
}

struct ChartResult {
  double value = 0.0;
  double missing = 0.0;  // estimated mass of the level set outside the box
  bool hit = false;
};

// Ray chart: x = v / Q(v), v = (e^u, 1), Q = q_p(v); density f(x) prod(x) du.
ChartResult ray_chart(const GridFunction& f, const CostExpr& q, std::span<const double> p, double step_fraction) {
  const LogGrid& g = f.grid();
  const std::size_t n = g.dim();
  const std::size_t m = n - 1;
  double du = std::numeric_limits<double>::infinity();
  for (double d : g.dy) du = std::min(du, d * step_fraction);

  std::vector<double> y(n), lp(n), w(n);
  for (std::size_t i = 0; i < n; ++i) lp[i] = std::log(p[i]);
  auto log_Q = [&](std::span<const double> u) {
    for (std::size_t i = 0; i < m; ++i) w[i] = lp[i] + u[i];
    w[m] = lp[m];
    return q.log_value_log(w);
  };
  // chart density at u, or NaN when the level-set point is outside the box
  auto density = [&](std::span<const double> u) {
    const double lq = log_Q(u);
    double su = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      y[i] = u[i] - lq;
      su += u[i];
    }
    y[m] = -lq;
    if (!inside_box(g, y)) return std::numeric_limits<double>::quiet_NaN();
    return f.interpolate_log(y) * std::exp(su - static_cast<double>(n) * lq);
  };

  ChartResult res;
  if (n == 2) {
    // y1 = u - log Q rises with u and y2 = -log Q falls, so the in-box set is an interval.
    const double lo_all = g.y0[0] - g.y_max(1), hi_all = g.y_max(0) - g.y0[1];
    double ub[1];
    auto y_at = [&](double u, int which) {
      ub[0] = u;
      const double lq = log_Q(ub);
      return which == 0 ? u - lq : -lq;
    };
    auto solve = [&](double target, int which, bool increasing) {
      double a = lo_all, b = hi_all;
      // coarse is enough: lattice points are filtered by the box test below
      for (int it = 0; it < 200 && b - a > 1e-3 * du; ++it) {
        const double mid = 0.5 * (a + b);
        const bool above = y_at(mid, which) > target;
        if (above == increasing) b = mid; else a = mid;
      }
      return 0.5 * (a + b);
    };
    // y1 >= y0_1 and y1 <= ymax_1 ; y2 <= ymax_2 and y2 >= y0_2
    double ua = std::max(solve(g.y0[0], 0, true), solve(g.y_max(1), 1, false));
    double ub_ = std::min(solve(g.y_max(0), 0, true), solve(g.y0[1], 1, false));
    ua = std::max(ua, lo_all);
    ub_ = std::min(ub_, hi_all);
    if (!(ub_ > ua)) return res;
    // lattice aligned to u = 0 so neighbouring p share sampling phases
    const long k0 = static_cast<long>(std::ceil(ua / du - 1e-2));
    const long k1 = static_cast<long>(std::floor(ub_ / du + 1e-2));
    double sum = 0.0;
    double first = 0.0, last = 0.0;
    bool any = false;
    double uu[1];
    for (long k = k0; k <= k1; ++k) {
      uu[0] = static_cast<double>(k) * du;
      double d = density(uu);
      if (std::isnan(d)) continue;
      if (!any) first = d;
      last = d;
      any = true;
      sum += d;
    }
    // the chart may also touch the box between lattice points
    if (!any) {
      uu[0] = 0.5 * (ua + ub_);
      const double d = density(uu);
      res.hit = !std::isnan(d);
      res.missing = res.hit ? std::abs(d) * 2.0 : 0.0;
      return res;
    }
    res.hit = true;
    res.value = sum * du;
    res.missing = std::abs(first) + std::abs(last);
    return res;
  }

  // General n: scan the full (n-1)-dimensional u-box.
  std::vector<long> k0(m), cnt(m);
  std::size_t total = 1;
  for (std::size_t i = 0; i < m; ++i) {
    const double lo = g.y0[i] - g.y_max(m), hi = g.y_max(i) - g.y0[m];
    k0[i] = static_cast<long>(std::ceil(lo / du - 1e-9));
    cnt[i] = static_cast<long>(std::floor(hi / du + 1e-9)) - k0[i] + 1;
    total *= static_cast<std::size_t>(std::max(0L, cnt[i]));
  }
  std::vector<double> vals(total);
  std::vector<char> in(total, 0);
  std::vector<double> u(m);
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t rem = k;
    for (std::size_t i = m; i-- > 0;) {
      u[i] = static_cast<double>(k0[i] + static_cast<long>(rem % cnt[i])) * du;
      rem /= cnt[i];
    }
    const double d = density(u);
    if (!std::isnan(d)) {
      vals[k] = d;
      in[k] = 1;
    }
  }
  double sum = 0.0, edge = 0.0;
  std::vector<std::size_t> stride(m, 1);
  for (std::size_t i = m; i-- > 1;) stride[i - 1] = stride[i] * cnt[i];
  for (std::size_t k = 0; k < total; ++k) {
    if (!in[k]) continue;
    res.hit = true;
    sum += vals[k];
    bool boundary = false;
    std::size_t rem = k;
    for (std::size_t i = m; i-- > 0 && !boundary;) {
      const long c = static_cast<long>(rem % cnt[i]);
      rem /= cnt[i];
      if (c == 0 || c + 1 == cnt[i] || !in[k - stride[i]] || !in[k + stride[i]]) boundary = true;
    }
    if (boundary) edge += std::abs(vals[k]);
  }
  const double cell = std::pow(du, static_cast<double>(m));
  res.value = sum * cell;
  res.missing = edge * cell / du;
  return res;
}

// Level curve q_p(x) = 1 (n = 2) parametrized by the log of one coordinate,
// whichever spans the longer log-interval inside the box.
ChartResult level_curve(const GridFunction& f, const CostExpr& q, std::span<const double> p, double step_fraction) {
  const LogGrid& g = f.grid();
  std::array<double, 2> x{}, grad{};
  auto qp = [&](double y1, double y2) {
    x = {std::exp(y1), std::exp(y2)};
    return q.value_scaled(p, x);
  };
  ChartResult res;
  if (qp(g.y0[0], g.y0[1]) > 1.0 || qp(g.y_max(0), g.y_max(1)) < 1.0) return res;
  // y_a where the level set meets y_b = yb (clamped to the box); a is the parameter axis
  auto at = [&](int a, double ya, double yb) { return a == 0 ? qp(ya, yb) : qp(yb, ya); };
  auto solve = [&](int a, double yb) {
    double lo = g.y0[a], hi = g.y_max(a);
    if (at(a, lo, yb) >= 1.0) return lo;
    if (at(a, hi, yb) <= 1.0) return hi;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (at(a, mid, yb) > 1.0) hi = mid; else lo = mid;
    }
    return 0.5 * (lo + hi);
  };
  const double u1a = solve(0, g.y_max(1)), u1b = solve(0, g.y0[1]);
  const double u2a = solve(1, g.y_max(0)), u2b = solve(1, g.y0[0]);
  const int a = (u1b - u1a) / g.dy[0] >= (u2b - u2a) / g.dy[1] ? 0 : 1;
  const int b = 1 - a;
  const double ua = a == 0 ? u1a : u2a, ub = a == 0 ? u1b : u2b;
  if (!(ub > ua)) return res;
  res.hit = true;

  // integrand in u = y_a: f(x) x_a / (p_b d_b q)
  auto integrand = [&](double u, double* chart_density) {
    const double yb = solve(b, u);
    std::array<double, 2> yy{};
    yy[a] = u;
    yy[b] = yb;
    std::array<double, 2> px{p[0] * std::exp(yy[0]), p[1] * std::exp(yy[1])};
    q.gradient(px, grad);
    const double fv = f.interpolate_log(yy);
    if (chart_density) *chart_density = fv * std::exp(yy[0] + yy[1]);
    return fv * std::exp(u) / (p[b] * grad[b]);
  };
  const double width = step_fraction * 2.0 * g.dy[a];
  const long panels = std::max(1L, static_cast<long>(std::ceil((ub - ua) / width)));
  const double h = (ub - ua) / static_cast<double>(panels);
  double sum = 0.0;
  for (long k = 0; k < panels; ++k) {
    const double mid = ua + (static_cast<double>(k) + 0.5) * h;
    for (std::size_t j = 0; j < kGl8x.size(); ++j) sum += kGl8w[j] * integrand(mid + 0.5 * h * kGl8x[j], nullptr);
  }
  res.value = 0.5 * h * sum;
  double da = 0.0, db = 0.0;
  integrand(ua, &da);
  integrand(ub, &db);
  res.missing = std::abs(da) + std::abs(db);
  return res;
}

// Fraction of a cell below level t from corner values (linear estimate).
double corner_fraction(const double* qc, std::size_t corners, double t) {
  double below = 0.0, total = 0.0;
  bool all_below = true, all_above = true;
  for (std::size_t c = 0; c < corners; ++c) {
    const double d = t - qc[c];
    if (d > 0) below += d;
    total += std::abs(d);
    all_below = all_below && qc[c] <= t;
    all_above = all_above && qc[c] >= t;
  }
  if (all_below) return 1.0;
  if (all_above || total == 0.0) return 0.0;
  return below / total;
}

struct VolumeBand {
  double variation = 0.0;  // largest q_p variation across one cell meeting the level set
  double missing = 0.0;
  bool hit = false;
};

// Cell k spans [y_k - dy/2, y_k + dy/2]; q_p is monotone so its range over
// the cell is [q(lower corner), q(upper corner)].
void cell_range(const CostExpr& q, std::span<const double> p, const LogGrid& g, std::span<const std::size_t> idx,
                std::vector<double>& x, double& lo, double& hi) {
  const std::size_t n = g.dim();
  for (std::size_t i = 0; i < n; ++i) x[i] = std::exp(g.y(i, idx[i]) - 0.5 * g.dy[i]);
  lo = q.value_scaled(p, x);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::exp(g.y(i, idx[i]) + 0.5 * g.dy[i]);
  hi = q.value_scaled(p, x);
}

// (V(1 + d) - V(1 - d)) / (2 d) with exact-fraction weighting of boundary cells.
double volume_difference(const GridFunction& f, const CostExpr& q, std::span<const double> p, double d, int sub,
                         const std::vector<double>& qlo, const std::vector<double>& qhi) {
  const LogGrid& g = f.grid();
  const std::size_t n = g.dim();
  const double t_lo = 1.0 - d, t_hi = 1.0 + d;
  const double cellvol = g.cell_volume();
  std::size_t sub_count = 1, corner_count = 1;
  for (std::size_t i = 0; i < n; ++i) {
    sub_count *= static_cast<std::size_t>(sub);
    corner_count *= 2;
  }
  const std::size_t lat = static_cast<std::size_t>(sub) + 1;
  std::size_t lat_count = 1;
  for (std::size_t i = 0; i < n; ++i) lat_count *= lat;
  std::vector<double> qlat(lat_count), qc(corner_count), x(n), y(n);
  std::vector<std::size_t> idx(n), sidx(n);
  double sum = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (qhi[k] <= t_lo || qlo[k] >= t_hi) continue;
    g.unravel(k, idx);
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) e += g.y(i, idx[i]);
    if (qlo[k] >= t_lo && qhi[k] <= t_hi) {
      sum += f[k] * std::exp(e) * cellvol;
      continue;
    }
    // q_p on the (sub+1)^n sub-lattice of the cell
    for (std::size_t l = 0; l < lat_count; ++l) {
      std::size_t rem = l;
      for (std::size_t i = n; i-- > 0;) {
        const std::size_t c = rem % lat;
        rem /= lat;
        x[i] = std::exp(g.y(i, idx[i]) + g.dy[i] * (static_cast<double>(c) / sub - 0.5));
      }
      qlat[l] = q.value_scaled(p, x);
    }
    const double subvol = cellvol / static_cast<double>(sub_count);
    for (std::size_t s = 0; s < sub_count; ++s) {
      std::size_t rem = s;
      for (std::size_t i = n; i-- > 0;) {
        sidx[i] = rem % static_cast<std::size_t>(sub);
        rem /= static_cast<std::size_t>(sub);
      }
      for (std::size_t c = 0; c < corner_count; ++c) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < n; ++i) off = off * lat + sidx[i] + ((c >> (n - 1 - i)) & 1U);
        qc[c] = qlat[off];
      }
      const double w = corner_fraction(qc.data(), corner_count, t_hi) - corner_fraction(qc.data(), corner_count, t_lo);
      if (w == 0.0) continue;
      double es = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        y[i] = g.y(i, idx[i]) + g.dy[i] * ((static_cast<double>(sidx[i]) + 0.5) / sub - 0.5);
        es += y[i];
      }
      sum += w * f.interpolate_log(y) * std::exp(es) * subvol;
    }
  }
  return sum / (2.0 * d);
}

double volume_scheme(const GridFunction& f, const CostExpr& q, std::span<const double> p, const RadonOptions& opts,
                     VolumeBand& band) {
  const LogGrid& g = f.grid();
  const std::size_t n = g.dim();
  std::vector<double> qlo(g.size()), qhi(g.size()), x(n);
  std::vector<std::size_t> idx(n);
  for (std::size_t k = 0; k < g.size(); ++k) {
    g.unravel(k, idx);
    cell_range(q, p, g, idx, x, qlo[k], qhi[k]);
    if (qlo[k] <= 1.0 && qhi[k] >= 1.0) {
      band.hit = true;
      band.variation = std::max(band.variation, qhi[k] - qlo[k]);
      bool face = false;
      for (std::size_t i = 0; i < n; ++i) face = face || idx[i] == 0 || idx[i] + 1 == g.N[i];
      if (face) {
        double e = 0.0;
        for (std::size_t i = 0; i < n; ++i) e += g.y(i, idx[i]);
        band.missing = std::max(band.missing, std::abs(f[k]) * std::exp(e));
      }
    }
  }
  if (!band.hit) return 0.0;
  double d = opts.delta;
  if (d == 0.0) {
    d = 4.0 * band.variation;
  } else if (d < band.variation) {
    fail(ErrorKind::Resolution, "finite-difference half-width " + std::to_string(d) +
                                    " is below the q_p variation across one cell (" + std::to_string(band.variation) + ")");
  }
  if (d >= 1.0) {
    fail(ErrorKind::Resolution, "grid too coarse: the level-set band half-width would be " + std::to_string(d));
  }
  const int sub = std::max(1, opts.subdivisions);
  const double a1 = volume_difference(f, q, p, d, sub, qlo, qhi);
  if (!opts.richardson || 0.5 * d < band.variation) return a1;
  const double a2 = volume_difference(f, q, p, 0.5 * d, sub, qlo, qhi);
  return (4.0 * a2 - a1) / 3.0;
}

void enforce_coverage(double value, double missing, bool hit, double floor, double tol, std::span<const double> p) {
  if (!hit) fail(ErrorKind::Coverage, "level set q_p = 1 does not meet the grid box at " + format_point(p));
  if (missing > tol * (std::abs(value) + floor)) {
    fail(ErrorKind::Coverage, "level set q_p = 1 leaves the grid box where f is not negligible at " + format_point(p) +
                                  " (estimated missing " + std::to_string(missing) + " vs value " + std::to_string(value) + ")");
  }
}

struct SchemeResult {
  double value = 0.0;
  double missing = 0.0;
  bool hit = false;
};

SchemeResult run_scheme(const GridFunction& f, const CostExpr& q, std::span<const double> p, const RadonOptions& opts) {
  SchemeResult r;
  switch (opts.scheme) {
    case RadonScheme::RayChart: {
      const auto c = ray_chart(f, q, p, opts.step_fraction);
      r = {c.value, c.missing, c.hit};
      break;
    }
    case RadonScheme::LevelCurve: {
      if (f.grid().dim() != 2) fail(ErrorKind::Argument, "the level-curve scheme needs n = 2");
      const auto c = level_curve(f, q, p, opts.step_fraction);
      r = {c.value, c.missing, c.hit};
      break;
    }
    case RadonScheme::VolumeDifference: {
      VolumeBand band;
      const double v = volume_scheme(f, q, p, opts, band);
      r = {v, band.missing, band.hit};
      break;
    }
  }
  return r;
}

}  // namespace

const char* to_string(RadonScheme s) {
  switch (s) {
    case RadonScheme::VolumeDifference: return "volume-difference";
    case RadonScheme::LevelCurve: return "level-curve";
    case RadonScheme::RayChart: return "ray-chart";
  }
  return "?";
}

RadonScheme radon_scheme_from_string(const std::string& name) {
  if (name == "volume-difference") return RadonScheme::VolumeDifference;
  if (name == "level-curve") return RadonScheme::LevelCurve;
  if (name == "ray-chart") return RadonScheme::RayChart;
  fail(ErrorKind::Argument, "unknown Radon scheme '" + name + "'");
}

double radon_forward(const GridFunction& f, const CostExpr& q, std::span<const double> p, const RadonOptions& opts) {
  check_inputs(f, q, p);
  f.grid().validate();
  const auto r = run_scheme(f, q, p, opts);
  enforce_coverage(r.value, r.missing, r.hit, kFloorFactor * density_scale(f), opts.coverage_tol, p);
  return r.value;
}

GridFunction radon_forward_grid(const GridFunction& f, const CostExpr& q, const LogGrid& pgrid, RadonOptions opts,
                                CoveragePolicy policy) {
  const std::size_t n = f.grid().dim();
  if (pgrid.dim() != n) fail(ErrorKind::Shape, "p-grid dimension does not match f");
  check_inputs(f, q, std::vector<double>(n, 1.0));
  f.grid().validate();
  const double floor = kFloorFactor * density_scale(f);
  GridFunction out(pgrid);
  parallel_for(pgrid.size(), [&](std::size_t k) {
    std::vector<std::size_t> idx(n);
    std::vector<double> p(n);
    pgrid.unravel(k, idx);
    for (std::size_t i = 0; i < n; ++i) p[i] = std::exp(pgrid.y(i, idx[i]));
    const auto r = run_scheme(f, q, p, opts);
    if (policy == CoveragePolicy::Throw) enforce_coverage(r.value, r.missing, r.hit, floor, opts.coverage_tol, p);
    out[k] = r.hit ? r.value : 0.0;
  });
  return out;
}

namespace {

double kernel_t_max(const KernelSpec& h) {
  switch (h.kind()) {
    case KernelSpec::Kind::Profit: return h.p0();
    case KernelSpec::Kind::Exponential: return 40.0;
    case KernelSpec::Kind::Sampled:
      return std::exp(h.y0() + static_cast<double>(h.samples().size() - 1) * h.dy());
  }
  return 0.0;
}

// q_p over the lower and upper box corners.
std::pair<double, double> corner_range(const LogGrid& g, const CostExpr& q, std::span<const double> p) {
  std::vector<double> x(g.dim());
  for (std::size_t i = 0; i < g.dim(); ++i) x[i] = std::exp(g.y0[i]);
  const double lo = q.value_scaled(p, x);
  for (std::size_t i = 0; i < g.dim(); ++i) x[i] = std::exp(g.y_max(i));
  return {lo, q.value_scaled(p, x)};
}

void check_kernel_cover(const KernelSpec& h, double qmax) {
  if (h.kind() != KernelSpec::Kind::Sampled) return;
  const auto& v = h.samples();
  double peak = 0.0;
  for (double s : v) peak = std::max(peak, std::abs(s));
  if (qmax > kernel_t_max(h) && std::abs(v.back()) > 1e-8 * peak) {
    fail(ErrorKind::Integrability, "sampled kernel is cut off at t = " + std::to_string(kernel_t_max(h)) +
                                       " while q_p reaches " + std::to_string(qmax) + " on the grid");
  }
}

// Simpson rule over log t on [t0, t1].
double log_simpson(double t0, double t1, int points, const std::function<double(double)>& g) {
  if (!(t1 > t0)) return 0.0;
  int m = std::max(3, points);
  if (m % 2 == 0) ++m;
  const double a = std::log(t0), b = std::log(t1);
  const double h = (b - a) / (m - 1);
  double sum = 0.0;
  for (int k = 0; k < m; ++k) {
    const double w = (k == 0 || k == m - 1) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    sum += w * g(std::exp(a + k * h));
  }
  return sum * h / 3.0;
}

double common_spacing(const LogGrid& g) {
  for (std::size_t i = 1; i < g.dim(); ++i) {
    if (std::abs(g.dy[i] - g.dy[0]) > 1e-12 * g.dy[0]) {
      fail(ErrorKind::Shape, "batch kernel transforms need equal spacing on all p-axes");
    }
  }
  return g.dy[0];
}

// R_q f on the p-lattice shifted by `shift` in log p and extended along the
// diagonal: `lo` steps below, and upward until R is negligible.
struct DiagonalLattice {
  std::size_t n = 0;
  std::size_t lo = 0;
  std::vector<std::size_t> N;  // extended sizes
  std::vector<std::size_t> stride;
  std::vector<double> R;

  double at(std::span<const std::size_t> idx, long j) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const long c = static_cast<long>(idx[i] + lo) + j;
      if (c < 0 || c >= static_cast<long>(N[i])) return 0.0;
      off += static_cast<std::size_t>(c) * stride[i];
    }
    return R[off];
  }
};

DiagonalLattice radon_lattice(const GridFunction& f, const CostExpr& q, const LogGrid& pgrid, double shift,
                              std::size_t lo, const RadonOptions& opts) {
  const std::size_t n = pgrid.dim();
  const double d = common_spacing(pgrid);
  DiagonalLattice L;
  L.n = n;
  L.lo = lo;
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = std::exp(pgrid.y0[i] + shift - static_cast<double>(lo) * d);
  const double q_low = corner_range(f.grid(), q, p).first;
  const std::size_t hi = static_cast<std::size_t>(std::ceil(std::max(0.0, -std::log(q_low)) / d)) + 1;
  const std::size_t core = lo + pgrid.N[0];
  L.N.assign(n, 0);
  L.stride.assign(n, 1);
  for (std::size_t i = 0; i < n; ++i) L.N[i] = lo + pgrid.N[i] + hi;
  for (std::size_t i = n; i-- > 1;) L.stride[i - 1] = L.stride[i] * L.N[i];
  L.R.assign(L.stride[0] * L.N[0], 0.0);
  std::vector<std::size_t> core_n(n);
  std::size_t core_total = 1;
  for (std::size_t i = 0; i < n; ++i) {
    core_n[i] = lo + pgrid.N[i];
    core_total *= core_n[i];
  }
  auto evaluate = [&](std::span<const std::size_t> e, std::vector<double>& pp) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < n; ++i) {
      pp[i] = std::exp(pgrid.y0[i] + shift + (static_cast<double>(e[i]) - static_cast<double>(lo)) * d);
      off += e[i] * L.stride[i];
    }
    const auto r = run_scheme(f, q, pp, opts);
    L.R[off] = r.hit ? r.value : 0.0;
    return L.R[off];
  };
  parallel_for(core_total, [&](std::size_t k) {
    std::vector<std::size_t> e(n);
    std::vector<double> pp(n);
    std::size_t rem = k;
    for (std::size_t i = n; i-- > 0;) {
      e[i] = rem % core_n[i];
      rem /= core_n[i];
    }
    evaluate(e, pp);
  });
  double rmax = 0.0;
  for (double v : L.R) rmax = std::max(rmax, std::abs(v));
  (void)core;
  // walk each diagonal that leaves the core through a top face
  parallel_for(core_total, [&](std::size_t k) {
    std::vector<std::size_t> e(n);
    std::vector<double> pp(n);
    std::size_t rem = k;
    bool top = false;
    for (std::size_t i = n; i-- > 0;) {
      e[i] = rem % core_n[i];
      rem /= core_n[i];
      top = top || e[i] + 1 == core_n[i];
    }
    if (!top) return;
    int small = 0;
    for (std::size_t j = 1; j <= hi; ++j) {
      for (auto& c : e) ++c;
      const double v = evaluate(e, pp);
      if (v == 0.0) break;
      small = std::abs(v) < 1e-14 * rmax ? small + 1 : 0;
      if (small >= 2) break;
    }
  });
  return L;
}

std::size_t kernel_lower_extension(const KernelSpec& h, double d) {
  const double t = kernel_t_max(h);
  return t > 1.0 ? static_cast<std::size_t>(std::ceil(std::log(t) / d)) : 0;
}

GridFunction kernel_from_lattice(const DiagonalLattice& L, const KernelSpec& h, const LogGrid& pgrid) {
  const double d = pgrid.dy[0];
  const long hi = static_cast<long>(L.N[0] - L.lo - pgrid.N[0]);
  GridFunction out(pgrid);
  std::vector<double> w;
  for (long j = -static_cast<long>(L.lo); j <= hi; ++j) w.push_back(h(std::exp(-static_cast<double>(j) * d)));
  std::vector<std::size_t> idx(pgrid.dim());
  for (std::size_t k = 0; k < pgrid.size(); ++k) {
    pgrid.unravel(k, idx);
    double s = 0.0;
    for (long j = -static_cast<long>(L.lo); j <= hi; ++j) {
      const double hv = w[static_cast<std::size_t>(j + static_cast<long>(L.lo))];
      if (hv != 0.0) s += hv * L.at(idx, j);
    }
    out[k] = s * d;
  }
  return out;
}

// Lattice built at p / p0: Pi(p) = integral over tau >= 0 of p0 (1 - e^-tau) R((p / p0) e^tau),
// trapezoid plus the endpoint Euler-Maclaurin term (g(0) = 0, g'(0) = p0 R(p / p0)).
GridFunction profit_from_lattice(const DiagonalLattice& L, double p0, const LogGrid& pgrid) {
  const double d = pgrid.dy[0];
  const long hi = static_cast<long>(L.N[0] - L.lo - pgrid.N[0]);
  GridFunction out(pgrid);
  std::vector<std::size_t> idx(pgrid.dim());
  for (std::size_t k = 0; k < pgrid.size(); ++k) {
    pgrid.unravel(k, idx);
    double s = 0.0;
    for (long j = 1; j <= hi; ++j) s += (1.0 - std::exp(-static_cast<double>(j) * d)) * L.at(idx, j);
    out[k] = p0 * (s * d + d * d / 12.0 * L.at(idx, 0));
  }
  return out;
}

void check_batch_inputs(const GridFunction& f, const CostExpr& q, const LogGrid& pgrid) {
  const std::size_t n = f.grid().dim();
  if (pgrid.dim() != n) fail(ErrorKind::Shape, "p-grid dimension does not match f");
  check_inputs(f, q, std::vector<double>(n, 1.0));
  f.grid().validate();
  pgrid.validate();
}

}  // namespace

double rhq_forward(const GridFunction& f, const CostExpr& q, const KernelSpec& h, std::span<const double> p,
                   const RhqOptions& opts) {
  check_inputs(f, q, p);
  const LogGrid& g = f.grid();
  g.validate();
  const auto [qmin, qmax] = corner_range(g, q, p);
  check_kernel_cover(h, qmax);
  if (opts.method == RhqMethod::Direct) {
    const std::size_t n = g.dim();
    std::vector<std::size_t> idx(n);
    std::vector<double> x(n);
    double sum = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (f[k] == 0.0) continue;
      g.unravel(k, idx);
      double e = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        e += g.y(i, idx[i]);
        x[i] = std::exp(g.y(i, idx[i]));
      }
      sum += h(q.value_scaled(p, x)) * f[k] * std::exp(e);
    }
    return sum * g.cell_volume();
  }
  double t1 = qmax;
  if (h.kind() == KernelSpec::Kind::Profit) t1 = std::min(t1, h.p0());
  std::vector<double> pt(p.size());
  return log_simpson(qmin, t1, opts.t_points, [&](double t) {
    for (std::size_t i = 0; i < p.size(); ++i) pt[i] = p[i] / t;
    const auto r = run_scheme(f, q, pt, opts.radon);
    return r.hit ? h(t) * r.value : 0.0;
  });
}

double profit_forward(const GridFunction& f, const CostExpr& q, double p0, std::span<const double> p,
                      const RadonOptions& opts) {
  check_inputs(f, q, p);
  if (!(p0 > 0.0)) fail(ErrorKind::Domain, "profit kernel requires p0 > 0");
  const LogGrid& g = f.grid();
  g.validate();
  const std::size_t n = g.dim();
  const std::size_t m = n - 1;
  double dmin = std::numeric_limits<double>::infinity();
  for (double d : g.dy) dmin = std::min(dmin, d);
  const double du = dmin * opts.step_fraction;
  std::vector<long> k0(m), cnt(m);
  std::size_t total = 1;
  for (std::size_t i = 0; i < m; ++i) {
    k0[i] = static_cast<long>(std::ceil((g.y0[i] - g.y_max(m)) / du - 1e-9));
    cnt[i] = std::max(0L, static_cast<long>(std::floor((g.y_max(i) - g.y0[m]) / du + 1e-9)) - k0[i] + 1);
    total *= static_cast<std::size_t>(cnt[i]);
  }
  std::vector<double> u(m), v(n), lv(n), y(n);
  double sum = 0.0, missing = 0.0;
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t rem = k;
    double su = 0.0;
    for (std::size_t i = m; i-- > 0;) {
      u[i] = static_cast<double>(k0[i] + static_cast<long>(rem % cnt[i])) * du;
      rem /= cnt[i];
      lv[i] = u[i];
      v[i] = std::exp(u[i]);
      su += u[i];
    }
    lv[m] = 0.0;
    v[m] = 1.0;
    const double Q = q.value_scaled(p, v);
    double rlo = -std::numeric_limits<double>::infinity(), rbox = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      rlo = std::max(rlo, g.y0[i] - lv[i]);
      rbox = std::min(rbox, g.y_max(i) - lv[i]);
    }
    const double rkink = std::log(p0 / Q);
    const double rhi = std::min(rbox, rkink);
    if (!(rhi > rlo)) continue;
    auto radial = [&](double rho) {
      for (std::size_t i = 0; i < n; ++i) y[i] = lv[i] + rho;
      const double r = std::exp(rho);
      return std::exp(static_cast<double>(n) * rho + su) * (p0 - r * Q) * f.interpolate_log(y);
    };
    const long panels = std::max(1L, static_cast<long>(std::ceil((rhi - rlo) / dmin)));
    const double h = (rhi - rlo) / static_cast<double>(panels);
    double s = 0.0;
    for (long j = 0; j < panels; ++j) {
      const double mid = rlo + (static_cast<double>(j) + 0.5) * h;
      for (std::size_t l = 0; l < kGl4x.size(); ++l) s += kGl4w[l] * radial(mid + 0.5 * h * kGl4x[l]);
    }
    sum += 0.5 * h * s;
    if (rbox < rkink) missing += std::abs(radial(rbox));
  }
  const double cell = std::pow(du, static_cast<double>(m));
  const double value = sum * cell;
  missing *= cell;
  const double floor = kFloorFactor * density_scale(f) * p0;
  if (missing > opts.coverage_tol * (std::abs(value) + floor)) {
    fail(ErrorKind::Coverage, "region {q_p <= p0} leaves the grid box where f is not negligible at " + format_point(p));
  }
  return value;
}

GridFunction rhq_forward_grid(const GridFunction& f, const CostExpr& q, const KernelSpec& h, const LogGrid& pgrid,
                              RadonOptions opts) {
  if (h.kind() == KernelSpec::Kind::Profit) return profit_forward_grid(f, q, h.p0(), pgrid, opts);
  check_batch_inputs(f, q, pgrid);
  const double d = common_spacing(pgrid);
  std::vector<double> p(pgrid.dim());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(pgrid.y_max(i));
  check_kernel_cover(h, corner_range(f.grid(), q, p).second);
  const auto L = radon_lattice(f, q, pgrid, 0.0, kernel_lower_extension(h, d), opts);
  return kernel_from_lattice(L, h, pgrid);
}

GridFunction profit_forward_grid(const GridFunction& f, const CostExpr& q, double p0, const LogGrid& pgrid,
                                 RadonOptions opts) {
  if (!(p0 > 0.0)) fail(ErrorKind::Domain, "profit kernel requires p0 > 0");
  check_batch_inputs(f, q, pgrid);
  const auto L = radon_lattice(f, q, pgrid, -std::log(p0), 0, opts);
  return profit_from_lattice(L, p0, pgrid);
}

double WeightedNormSpec::alpha() const {
  double s = 0.0;
  for (double v : c) s += v;
  return s;
}

WeightedNormSpec::R WeightedNormSpec::parse_r(const std::string& text) {
  if (text == "1") return R::One;
  if (text == "2") return R::Two;
  if (text == "inf" || text == "infinity") return R::Inf;
  fail(ErrorKind::Argument, "norm exponent must be 1, 2 or inf, got '" + text + "'");
}

const char* to_string(WeightedNormSpec::R r) {
  switch (r) {
    case WeightedNormSpec::R::One: return "1";
    case WeightedNormSpec::R::Two: return "2";
    case WeightedNormSpec::R::Inf: return "inf";
  }
  return "?";
}

double weighted_norm(const GridFunction& f, const WeightedNormSpec& spec) {
  const LogGrid& g = f.grid();
  if (spec.c.size() != g.dim()) fail(ErrorKind::Shape, "weight vector c does not match the grid dimension");
  std::vector<std::size_t> idx(g.dim());
  double acc = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    g.unravel(k, idx);
    double e = 0.0;
    for (std::size_t i = 0; i < g.dim(); ++i) e += spec.c[i] * g.y(i, idx[i]);
    const double v = std::abs(f[k]) * std::exp(e);
    switch (spec.r) {
      case WeightedNormSpec::R::One: acc += v; break;
      case WeightedNormSpec::R::Two: acc += v * v; break;
      case WeightedNormSpec::R::Inf: acc = std::max(acc, v); break;
    }
  }
  switch (spec.r) {
    case WeightedNormSpec::R::One: return acc * g.cell_volume();
    case WeightedNormSpec::R::Two: return std::sqrt(acc * g.cell_volume());
    case WeightedNormSpec::R::Inf: return acc;
  }
  return acc;
}

bool InequalityReport::holds(double tol) const {
  return std::all_of(lines.begin(), lines.end(), [tol](const InequalityLine& l) { return l.holds(tol); });
}

LogGrid reflected_grid(const LogGrid& g) {
  LogGrid p = g;
  for (std::size_t i = 0; i < g.dim(); ++i) p.y0[i] = -g.y_max(i);
  return p;
}

ForwardBatch forward_batch(const GridFunction& f, const CostExpr& q, const LogGrid& pgrid, const KernelSpec* h,
                           double p0) {
  if (!(p0 > 0.0)) fail(ErrorKind::Domain, "profit kernel requires p0 > 0");
  check_batch_inputs(f, q, pgrid);
  const std::size_t n = pgrid.dim();
  const double d = common_spacing(pgrid);
  const RadonOptions opts{.scheme = RadonScheme::RayChart};
  const bool plain = h && h->kind() != KernelSpec::Kind::Profit;
  if (plain) {
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = std::exp(pgrid.y_max(i));
    check_kernel_cover(*h, corner_range(f.grid(), q, p).second);
  }
  const auto L = radon_lattice(f, q, pgrid, 0.0, plain ? kernel_lower_extension(*h, d) : 0, opts);
  ForwardBatch out;
  out.radon = GridFunction(pgrid);
  std::vector<std::size_t> idx(n);
  for (std::size_t k = 0; k < pgrid.size(); ++k) {
    pgrid.unravel(k, idx);
    out.radon[k] = L.at(idx, 0);
  }
  out.profit = p0 == 1.0 ? profit_from_lattice(L, p0, pgrid)
                         : profit_from_lattice(radon_lattice(f, q, pgrid, -std::log(p0), 0, opts), p0, pgrid);
  if (plain) {
    out.kernel = kernel_from_lattice(L, *h, pgrid);
  } else if (h) {
    out.kernel = h->p0() == p0 ? out.profit
                               : profit_from_lattice(radon_lattice(f, q, pgrid, -std::log(h->p0()), 0, opts), h->p0(), pgrid);
  }
  return out;
}

std::vector<InequalityReport> prop1_check_all(const GridFunction& f, const CostExpr& q, const KernelSpec* h,
                                              std::span<const double> c, double p0,
                                              std::span<const WeightedNormSpec::R> rs) {
  const std::size_t n = f.grid().dim();
  if (c.size() != n) fail(ErrorKind::Shape, "weight vector c does not match the grid dimension");
  for (double v : c) {
    if (!(v > 0.0)) fail(ErrorKind::Domain, "weights c must be positive");
  }
  if (h) h->check_integrable(std::accumulate(c.begin(), c.end(), 0.0));
  const auto batch = forward_batch(f, q, reflected_grid(f.grid()), h, p0);
  const GridFunction& R = batch.radon;
  const GridFunction& Rh = batch.kernel;
  const GridFunction& Pi = batch.profit;

  std::vector<double> cv(c.begin(), c.end()), cd(n);
  for (std::size_t i = 0; i < n; ++i) cd[i] = 1.0 - cv[i];
  const double alpha = std::accumulate(cv.begin(), cv.end(), 0.0);
  std::vector<cplx> zc(cv.begin(), cv.end());
  const double me = mellin_expcost_closed(q, zc).real();
  const double gamma_a = std::tgamma(alpha);

  std::vector<InequalityReport> out;
  for (auto r : rs) {
    InequalityReport rep;
    rep.spec.r = r;
    rep.spec.c = cv;
    const double fn = weighted_norm(f, WeightedNormSpec{r, cd});
    rep.lines.push_back({"R_q", weighted_norm(R, rep.spec), me / gamma_a * fn});
    if (h) rep.lines.push_back({"R^h_q", weighted_norm(Rh, rep.spec), me / gamma_a * h->weighted_l1(alpha) * fn});
    rep.lines.push_back({"Pi_q", weighted_norm(Pi, rep.spec),
                         std::pow(p0, alpha + 1.0) / std::tgamma(alpha + 2.0) * me * fn});
    out.push_back(std::move(rep));
  }
  return out;
}

InequalityReport prop1_check(const GridFunction& f, const CostExpr& q, const KernelSpec* h, WeightedNormSpec::R r,
                             std::span<const double> c, double p0) {
  const WeightedNormSpec::R rs[] = {r};
  return prop1_check_all(f, q, h, c, p0, rs).front();
}

double grid_mass(const GridFunction& f) {
  const LogGrid& g = f.grid();
  std::vector<std::size_t> idx(g.dim());
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (f[k] == 0.0) continue;
    g.unravel(k, idx);
    double e = 0.0;
    for (std::size_t i = 0; i < g.dim(); ++i) e += g.y(i, idx[i]);
    s += f[k] * std::exp(e);
  }
  return s * g.cell_volume();
}

double coarea_check(const GridFunction& f, const CostExpr& q, std::span<const double> p, const CoareaOptions& opts) {
  check_inputs(f, q, p);
  f.grid().validate();
  const auto [qmin, qmax] = corner_range(f.grid(), q, p);
  double t0 = qmin, t1 = qmax;
  if (opts.t_min > 0.0 || opts.t_max > 0.0) {
    t0 = opts.t_min > 0.0 ? opts.t_min : qmin;
    t1 = opts.t_max > 0.0 ? opts.t_max : qmax;
    if (t0 > qmin * (1 + 1e-12) || t1 < qmax * (1 - 1e-12)) {
      fail(ErrorKind::Coverage, "t-range [" + std::to_string(t0) + ", " + std::to_string(t1) +
                                    "] does not cover the q_p values of the box [" + std::to_string(qmin) + ", " +
                                    std::to_string(qmax) + "]");
    }
  }
  std::vector<double> pt(p.size());
  const double coarea = log_simpson(t0, t1, opts.t_points, [&](double t) {
    for (std::size_t i = 0; i < p.size(); ++i) pt[i] = p[i] / t;
    const auto r = run_scheme(f, q, pt, opts.radon);
    return r.hit ? r.value : 0.0;
  });
  const double mass = grid_mass(f);
  const double diff = std::abs(mass - coarea);
  return mass != 0.0 ? diff / std::abs(mass) : diff;
}

double factorization_check(const CostExpr& q, const KernelSpec& h, std::span<const double> x, std::span<const cplx> z,
                           std::size_t nodes) {
  const std::size_t n = q.dimension();
  if (x.size() != n || z.size() != n) fail(ErrorKind::Shape, "x and z must have one entry per axis");
  cplx s = 0.0;
  for (auto zi : z) {
    if (!(zi.real() > 0.0)) fail(ErrorKind::Domain, "factorization needs Re z > 0");
    s += zi;
  }
  for (double xi : x) {
    if (!(xi > 0.0)) fail(ErrorKind::Domain, "x must be positive");
  }
  h.check_integrable(s.real());
  const double T = kernel_t_max(h);
  QuadratureBox box;
  box.nodes.assign(n, nodes);
  box.extension = 0.1;
  box.convergence_tol = 1e-6;
  std::vector<double> e(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(e.begin(), e.end(), 1e-300);
    e[i] = 1.0;
    box.ymin.push_back(-std::min(200.0, 40.0 / z[i].real()));
    box.ymax.push_back(std::log(T / (q.value(e) * x[i])) + 1.0);
  }
  std::vector<double> px(n);
  const cplx lhs = complex_gamma(s) * mellin_quadrature(
                                          [&](std::span<const double> p) {
                                            return h(q.value_scaled(p, x));
                                          },
                                          z, box);
  cplx xz = 0.0;
  for (std::size_t i = 0; i < n; ++i) xz -= z[i] * std::log(x[i]);
  const cplx rhs = std::exp(xz) * mellin_expcost_closed(q, z) * kernel_mellin(h, s);
  return std::abs(lhs - rhs) / std::abs(rhs);
}

}  // namespace mellin_radon
