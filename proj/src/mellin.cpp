#include "mellin_radon/mellin.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>

#include "mellin_radon/errors.hpp"

namespace mellin_radon {

namespace {

constexpr double kPi = std::numbers::pi;

// FFTW planning is not thread-safe.
std::mutex& plan_mutex() {
  static std::mutex mu;
  return mu;
}

void fft_inplace(std::vector<cplx>& data, const std::vector<std::size_t>& N, int sign) {
  std::vector<int> dims(N.begin(), N.end());
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(plan_mutex());
    plan = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), ptr, ptr, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard lock(plan_mutex());
  fftw_destroy_plan(plan);
}

std::vector<std::size_t> row_strides(const std::vector<std::size_t>& N) {
  std::vector<std::size_t> s(N.size(), 1);
  for (std::size_t i = N.size(); i-- > 1;) s[i - 1] = s[i] * N[i];
  return s;
}

void check_plane(std::span<const double> c, std::size_t n) {
  if (c.size() != n) fail(ErrorKind::Shape, "plane c has " + std::to_string(c.size()) + " entries, grid has " + std::to_string(n) + " axes");
  for (double ci : c) {
    if (!(ci > 0.0)) fail(ErrorKind::Domain, "every component of c must be positive");
  }
}

// Neumaier compensated complex accumulator.
struct Accumulator {
  double re = 0, im = 0, cre = 0, cim = 0;
  static void add(double& sum, double& comp, double v) {
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  void add(cplx v) {
    add(re, cre, v.real());
    add(im, cim, v.imag());
  }
  cplx value() const { return {re + cre, im + cim}; }
};

}  // namespace

long MellinSlice::signed_index(std::size_t axis, std::size_t m) const noexcept {
  const long n = static_cast<long>(N[axis]);
  const long k = static_cast<long>(m);
  return k < n / 2 ? k : k - n;
}

double MellinSlice::xi(std::size_t axis, std::size_t m) const noexcept {
  return 2.0 * kPi * static_cast<double>(signed_index(axis, m)) / (static_cast<double>(N[axis]) * dy[axis]);
}

void MellinSlice::z_at(std::size_t flat, std::span<cplx> z) const {
  for (std::size_t i = dim(); i-- > 0;) {
    const std::size_t m = flat % N[i];
    flat /= N[i];
    z[i] = cplx(c[i], xi(i, m));
  }
}

bool MellinSlice::is_nyquist(std::size_t flat) const {
  for (std::size_t i = dim(); i-- > 0;) {
    if (flat % N[i] == N[i] / 2) return true;
    flat /= N[i];
  }
  return false;
}

std::size_t MellinSlice::mirror(std::size_t flat) const {
  if (is_nyquist(flat)) return size();
  const auto strides = row_strides(N);
  std::size_t out = 0;
  for (std::size_t i = dim(); i-- > 0;) {
    const std::size_t m = flat % N[i];
    flat /= N[i];
    out += ((N[i] - m) % N[i]) * strides[i];
  }
  return out;
}

void MellinSlice::write_csv(std::ostream& os) const {
  char buf[64];
  os << "# c =";
  for (double ci : c) {
    std::snprintf(buf, sizeof buf, " %.17g", ci);
    os << buf;
  }
  os << "\n";
  for (std::size_t i = 0; i < dim(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", dy[i]);
    os << "# axis " << (i + 1) << ": " << buf << " " << N[i] << "\n";
  }
  os << "# tapered " << (tapered ? 1 : 0) << "\n# reflected " << (reflected ? 1 : 0) << "\n";
  std::vector<cplx> z(dim());
  for (std::size_t k = 0; k < size(); ++k) {
    z_at(k, z);
    for (const auto& zi : z) {
      std::snprintf(buf, sizeof buf, "%.17g,", zi.imag());
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", values[k].real(), values[k].imag());
    os << buf << "\n";
  }
}

MellinSlice MellinSlice::read_csv(std::istream& is) {
  MellinSlice s;
  std::string line;
  int lineno = 0;
  bool have_c = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string key;
      ss >> key;
      if (key == "c") {
        std::string eq;
        ss >> eq;
        for (double v; ss >> v;) s.c.push_back(v);
        s.dy.assign(s.c.size(), 0.0);
        s.N.assign(s.c.size(), 0);
        have_c = true;
      } else if (key == "axis") {
        std::string label;
        ss >> label;
        const std::size_t i = std::stoul(label) - 1;
        if (!have_c || i >= s.c.size()) throw ParseError("axis header before '# c =' or out of range", lineno, 1);
        if (!(ss >> s.dy[i] >> s.N[i])) throw ParseError("malformed axis header", lineno, 1);
      } else if (key == "tapered") {
        int v = 0;
        ss >> v;
        s.tapered = v != 0;
      } else if (key == "reflected") {
        int v = 0;
        ss >> v;
        s.reflected = v != 0;
      }
      continue;
    }
    std::vector<double> cols;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        cols.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError("malformed number '" + cell + "'", lineno, 1);
      }
    }
    if (cols.size() != s.c.size() + 2) throw ParseError("expected " + std::to_string(s.c.size() + 2) + " columns", lineno, 1);
    s.values.emplace_back(cols[cols.size() - 2], cols.back());
  }
  if (!have_c) throw ParseError("missing '# c =' header", 1, 1);
  std::size_t expect = 1;
  for (auto n : s.N) expect *= n;
  if (expect != s.values.size()) fail(ErrorKind::Shape, "slice header promises " + std::to_string(expect) + " values");
  return s;
}

void MellinSlice::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::Io, "cannot write " + path);
  write_csv(os);
  if (!os) fail(ErrorKind::Io, "write failed for " + path);
}

MellinSlice MellinSlice::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Io, "cannot read " + path);
  return read_csv(is);
}

GridFunction ec_transform(const GridFunction& f, std::span<const double> c) {
  const LogGrid& g = f.grid();
  if (c.size() != g.dim()) fail(ErrorKind::Shape, "plane c does not match the grid dimension");
  GridFunction out(g);
  std::vector<std::size_t> idx(g.dim());
  for (std::size_t k = 0; k < g.size(); ++k) {
    g.unravel(k, idx);
    double e = 0.0;
    for (std::size_t i = 0; i < g.dim(); ++i) e += c[i] * g.y(i, idx[i]);
    out[k] = std::exp(e) * f[k];
  }
  return out;
}

std::vector<double> cosine_taper(const LogGrid& g) {
  std::vector<std::vector<double>> axis(g.dim());
  for (std::size_t i = 0; i < g.dim(); ++i) {
    const std::size_t n = g.N[i];
    const std::size_t K = std::max<std::size_t>(1, (n + 9) / 10);
    axis[i].assign(n, 1.0);
    for (std::size_t k = 0; k < K; ++k) {
      const double w = 0.5 * (1.0 - std::cos(kPi * static_cast<double>(k) / static_cast<double>(K)));
      axis[i][k] = w;
      axis[i][n - 1 - k] = w;
    }
  }
  std::vector<double> out(g.size());
  std::vector<std::size_t> idx(g.dim());
  for (std::size_t k = 0; k < g.size(); ++k) {
    g.unravel(k, idx);
    double w = 1.0;
    for (std::size_t i = 0; i < g.dim(); ++i) w *= axis[i][idx[i]];
    out[k] = w;
  }
  return out;
}

MellinSlice mellin_forward(const GridFunction& f, std::span<const double> c, bool taper) {
  const LogGrid& g = f.grid();
  g.validate();
  check_plane(c, g.dim());
  const GridFunction e = ec_transform(f, c);
  std::vector<cplx> data(e.values().begin(), e.values().end());
  if (taper) {
    const auto w = cosine_taper(g);
    for (std::size_t k = 0; k < data.size(); ++k) data[k] *= w[k];
  }
  fft_inplace(data, g.N, FFTW_BACKWARD);

  MellinSlice s;
  s.c.assign(c.begin(), c.end());
  s.dy = g.dy;
  s.N = g.N;
  s.tapered = taper;
  const double weight = g.cell_volume();
  std::vector<cplx> z(g.dim());
  for (std::size_t k = 0; k < data.size(); ++k) {
    s.z_at(k, z);
    double phase = 0.0;
    for (std::size_t i = 0; i < g.dim(); ++i) phase += z[i].imag() * g.y0[i];
    data[k] *= weight * std::polar(1.0, phase);
  }
  s.values = std::move(data);
  return s;
}

GridFunction mellin_inverse(const MellinSlice& slice, const LogGrid& target, double* imag_residue) {
  target.validate();
  if (slice.dim() != target.dim() || slice.N != target.N) fail(ErrorKind::Shape, "slice lattice does not match the target grid");
  for (std::size_t i = 0; i < target.dim(); ++i) {
    if (std::abs(slice.dy[i] - target.dy[i]) > 1e-12 * target.dy[i]) {
      fail(ErrorKind::Shape, "slice frequency spacing is not dual to the target grid on axis " + std::to_string(i + 1));
    }
  }
  if (slice.values.size() != target.size()) fail(ErrorKind::Shape, "slice has the wrong number of values");
  std::vector<cplx> data(slice.values);
  double norm = 1.0;
  for (std::size_t i = 0; i < target.dim(); ++i) norm *= static_cast<double>(target.N[i]) * target.dy[i];
  std::vector<cplx> z(target.dim());
  for (std::size_t k = 0; k < data.size(); ++k) {
    slice.z_at(k, z);
    double phase = 0.0;
    for (std::size_t i = 0; i < target.dim(); ++i) phase -= z[i].imag() * target.y0[i];
    data[k] *= std::polar(1.0 / norm, phase);
  }
  fft_inplace(data, target.N, FFTW_FORWARD);

  GridFunction out(target);
  std::vector<std::size_t> idx(target.dim());
  double max_re = 0.0, max_im = 0.0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    target.unravel(k, idx);
    double e = 0.0;
    for (std::size_t i = 0; i < target.dim(); ++i) e += slice.c[i] * target.y(i, idx[i]);
    max_re = std::max(max_re, std::abs(data[k].real()));
    max_im = std::max(max_im, std::abs(data[k].imag()));
    out[k] = std::exp(-e) * data[k].real();
  }
  if (imag_residue) *imag_residue = max_re > 0.0 ? max_im / max_re : max_im;
  return out;
}

QuadratureBox QuadratureBox::uniform(std::size_t n, double ymin, double ymax, std::size_t nodes) {
  QuadratureBox b;
  b.ymin.assign(n, ymin);
  b.ymax.assign(n, ymax);
  b.nodes.assign(n, nodes);
  return b;
}

namespace {

// Evaluates the integrand at real log-point y; returns e^{z.w} f(e^w) det(dw/dy).
using PointRule = std::function<cplx(std::span<const double> y)>;

cplx box_quadrature(const PointRule& rule, const QuadratureBox& box) {
  const std::size_t n = box.nodes.size();
  if (n == 0 || box.ymin.size() != n || box.ymax.size() != n) fail(ErrorKind::Shape, "quadrature box axes are inconsistent");
  std::vector<double> dy(n), lo(n);
  std::vector<std::size_t> total(n), pad(n);
  double weight = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (box.nodes[i] < 2 || !(box.ymax[i] > box.ymin[i])) fail(ErrorKind::Shape, "quadrature box needs ymax > ymin and >= 2 nodes");
    dy[i] = (box.ymax[i] - box.ymin[i]) / static_cast<double>(box.nodes[i] - 1);
    pad[i] = static_cast<std::size_t>(std::ceil(box.extension * static_cast<double>(box.nodes[i] - 1)));
    total[i] = box.nodes[i] + 2 * pad[i];
    lo[i] = box.ymin[i] - static_cast<double>(pad[i]) * dy[i];
    weight *= dy[i];
  }
  // Slabs along the first axis are summed independently and reduced in order.
  const std::size_t slabs = total[0];
  std::size_t inner = 1;
  for (std::size_t i = 1; i < n; ++i) inner *= total[i];
  std::vector<Accumulator> wide(slabs), core(slabs);
  std::vector<double> mag(slabs, 0.0);
  parallel_for(slabs, [&](std::size_t s) {
    std::vector<double> y(n);
    std::vector<std::size_t> idx(n);
    idx[0] = s;
    y[0] = lo[0] + static_cast<double>(s) * dy[0];
    const bool slab_inside = s >= pad[0] && s < pad[0] + box.nodes[0];
    for (std::size_t k = 0; k < inner; ++k) {
      std::size_t rem = k;
      bool inside = slab_inside;
      for (std::size_t i = n; i-- > 1;) {
        idx[i] = rem % total[i];
        rem /= total[i];
        y[i] = lo[i] + static_cast<double>(idx[i]) * dy[i];
        inside = inside && idx[i] >= pad[i] && idx[i] < pad[i] + box.nodes[i];
      }
      const cplx v = rule(y);
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) continue;
      wide[s].add(v);
      if (inside) core[s].add(v);
      mag[s] += std::abs(v);
    }
  });
  Accumulator w, c;
  double m = 0.0;
  for (std::size_t s = 0; s < slabs; ++s) {
    w.add(wide[s].value());
    c.add(core[s].value());
    m += mag[s];
  }
  const cplx big = w.value() * weight, small = c.value() * weight;
  if (std::abs(big - small) > box.convergence_tol * m * weight) {
    fail(ErrorKind::NonConvergence, "Mellin quadrature changes by " + std::to_string(std::abs(big - small)) +
                                        " when the box is widened; the integrand does not decay inside the box");
  }
  return big;
}

void check_z(std::span<const cplx> z, std::size_t n) {
  if (z.size() != n) fail(ErrorKind::Shape, "z has the wrong number of components");
}

}  // namespace

cplx mellin_quadrature(const CostFunction& f, std::span<const cplx> z, const QuadratureBox& box) {
  check_z(z, box.nodes.size());
  const std::vector<cplx> zz(z.begin(), z.end());
  return box_quadrature(
      [&](std::span<const double> y) {
        thread_local std::vector<double> x;
        x.resize(y.size());
        cplx e = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
          x[i] = std::exp(y[i]);
          e += zz[i] * y[i];
        }
        const double fx = f(x);
        return fx == 0.0 ? cplx(0.0) : std::exp(e) * fx;
      },
      box);
}

cplx mellin_quadrature(const ComplexIntegrand& f, std::span<const cplx> z, const QuadratureBox& box,
                       const ContourMap& contour) {
  check_z(z, box.nodes.size());
  const std::vector<cplx> zz(z.begin(), z.end());
  return box_quadrature(
      [&](std::span<const double> y) {
        thread_local std::vector<cplx> w;
        w.resize(y.size());
        const cplx jac = contour(y, w);
        cplx e = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) e += zz[i] * w[i];
        return std::exp(e) * f(w) * jac;
      },
      box);
}

ContourMap rotation_contour(std::vector<double> theta) {
  return [theta = std::move(theta)](std::span<const double> y, std::span<cplx> w) {
    for (std::size_t i = 0; i < y.size(); ++i) w[i] = cplx(y[i], theta[i]);
    return cplx(1.0);
  };
}

ContourMap ces_contour(const CostExpr& q, std::span<const double> xi, double gamma, double margin) {
  if (q.is_axis()) fail(ErrorKind::Structural, "contour needs a CES node");
  const auto& node = q.node();
  for (const auto& ch : node.children) {
    if (!ch.is_axis()) fail(ErrorKind::Argument, "ces_contour supports flat CES nodes only");
  }
  if (xi.size() != q.dimension()) fail(ErrorKind::Shape, "frequency vector has the wrong size");
  const double alpha = node.alpha;
  bool pos = false, neg = false;
  double total = 0.0;
  for (double v : xi) {
    pos = pos || v > 0.0;
    neg = neg || v < 0.0;
    total += v;
  }
  const std::size_t n = xi.size();
  std::vector<double> delta(n, 0.0);
  if (pos && neg) {
    for (std::size_t i = 0; i < n; ++i) {
      if (xi[i] != 0.0) delta[i] = std::copysign((kPi - margin) / (2.0 * alpha), xi[i]);
    }
  }
  const double g = total > 0.0 ? gamma : (total < 0.0 ? -gamma : 0.0);
  // weight and axis of each child, in child order
  std::vector<int> ax(n);
  for (std::size_t j = 0; j < n; ++j) ax[j] = node.children[j].axis_index();
  std::vector<double> a = node.a;
  return [=](std::span<const double> y, std::span<cplx> w) {
    double top = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) top = std::max(top, alpha * y[ax[j]]);
    cplx S = 0.0;
    for (std::size_t j = 0; j < n; ++j) S += a[j] * std::polar(std::exp(alpha * y[ax[j]] - top), alpha * delta[ax[j]]);
    const double phi = g - std::arg(S) / alpha;
    for (std::size_t i = 0; i < n; ++i) w[i] = cplx(y[i], phi + delta[i]);
    // arg S is invariant under y -> y + t I, so det(I + i 1 grad(phi)^T) = 1.
    return cplx(1.0);
  };
}

namespace {

cplx log_closed_node(const CostExpr& e, std::span<const cplx> z, cplx& s_out) {
  const auto& n = e.node();
  const std::size_t k = n.children.size();
  std::vector<cplx> zeta(k);
  cplx acc = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const auto& ch = n.children[j];
    if (ch.is_axis()) {
      zeta[j] = z[ch.axis_index()];
    } else {
      cplx s_child;
      acc += log_closed_node(ch, z, s_child);
      acc -= log_gamma(s_child);
      zeta[j] = s_child;
    }
  }
  cplx s = 0.0;
  for (const auto& v : zeta) s += v;
  acc += log_gamma(s) - static_cast<double>(k - 1) * std::log(n.alpha) - s * std::log(n.C) - log_gamma(s / n.alpha);
  for (std::size_t j = 0; j < k; ++j) acc += -zeta[j] / n.alpha * std::log(n.a[j]) + log_gamma(zeta[j] / n.alpha);
  s_out = s;
  return acc;
}

}  // namespace

cplx log_mellin_expcost_closed(const CostExpr& q, std::span<const cplx> z) {
  if (q.is_axis()) fail(ErrorKind::Structural, "the root of a cost expression must be a CES node");
  if (z.size() != q.dimension()) fail(ErrorKind::Shape, "z has " + std::to_string(z.size()) + " components, q has " + std::to_string(q.dimension()) + " axes");
  for (const auto& zi : z) {
    if (!(zi.real() > 0.0)) fail(ErrorKind::Domain, "closed form requires Re z > 0");
  }
  cplx s;
  return log_closed_node(q, z, s);
}

cplx mellin_expcost_closed(const CostExpr& q, std::span<const cplx> z) {
  return std::exp(log_mellin_expcost_closed(q, z));
}

}  // namespace mellin_radon
