#include "mellin_radon/grid.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <mutex>
#include <thread>

#include "mellin_radon/errors.hpp"

namespace mellin_radon {

LogGrid LogGrid::uniform(std::size_t n, double ymin, double ymax, std::size_t N) {
  if (N < 2 || !(ymax > ymin)) fail(ErrorKind::Shape, "uniform grid needs ymax > ymin and N >= 2");
  LogGrid g;
  g.y0.assign(n, ymin);
  g.dy.assign(n, (ymax - ymin) / static_cast<double>(N - 1));
  g.N.assign(n, N);
  return g;
}

std::size_t LogGrid::size() const noexcept {
  std::size_t s = 1;
  for (auto n : N) s *= n;
  return N.empty() ? 0 : s;
}

double LogGrid::cell_volume() const noexcept {
  double v = 1.0;
  for (double d : dy) v *= d;
  return v;
}

std::vector<std::size_t> LogGrid::strides() const {
  std::vector<std::size_t> s(dim(), 1);
  for (std::size_t i = dim(); i-- > 1;) s[i - 1] = s[i] * N[i];
  return s;
}

void LogGrid::unravel(std::size_t flat, std::span<std::size_t> idx) const {
  for (std::size_t i = dim(); i-- > 0;) {
    idx[i] = flat % N[i];
    flat /= N[i];
  }
}

void LogGrid::validate() const {
  if (N.empty() || y0.size() != N.size() || dy.size() != N.size()) {
    fail(ErrorKind::Shape, "grid axes are inconsistent");
  }
  for (std::size_t i = 0; i < dim(); ++i) {
    if (N[i] < 8 || (N[i] & (N[i] - 1)) != 0) {
      fail(ErrorKind::Shape, "axis " + std::to_string(i + 1) + " has N = " + std::to_string(N[i]) +
                                 "; sample counts must be powers of two >= 8");
    }
    if (!(dy[i] > 0.0) || !std::isfinite(y0[i])) fail(ErrorKind::Shape, "grid spacing must be positive");
  }
}

bool LogGrid::same_lattice(const LogGrid& other, double rel_tol) const {
  if (dim() != other.dim()) return false;
  for (std::size_t i = 0; i < dim(); ++i) {
    if (N[i] != other.N[i]) return false;
    if (std::abs(dy[i] - other.dy[i]) > rel_tol * dy[i]) return false;
  }
  return true;
}

GridFunction::GridFunction(LogGrid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    fail(ErrorKind::Shape, "grid has " + std::to_string(grid_.size()) + " nodes but " +
                               std::to_string(values_.size()) + " values were given");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) fail(ErrorKind::Domain, "grid function values must be finite");
  }
}

GridFunction::GridFunction(LogGrid grid) : grid_(std::move(grid)), values_(grid_.size(), 0.0) {}

GridFunction GridFunction::sample(const LogGrid& grid,
                                  const std::function<double(std::span<const double>)>& f) {
  GridFunction out(grid);
  const std::size_t n = grid.dim();
  std::vector<std::size_t> idx(n);
  std::vector<double> x(n);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    grid.unravel(k, idx);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::exp(grid.y(i, idx[i]));
    out.values_[k] = f(x);
  }
  return out;
}

double GridFunction::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

namespace {

// First stencil node and the four Lagrange weights for coordinate y on axis i.
// Returns false when y is outside the axis range.
bool cubic_stencil(const LogGrid& g, std::size_t i, double y, std::size_t& first, double w[4]) {
  const double t = (y - g.y0[i]) / g.dy[i];
  const double last = static_cast<double>(g.N[i] - 1);
  if (!(t >= -1e-12 && t <= last + 1e-12)) return false;
  long base = static_cast<long>(std::floor(t)) - 1;
  base = std::clamp(base, 0L, static_cast<long>(g.N[i]) - 4);
  first = static_cast<std::size_t>(base);
  const double u = t - static_cast<double>(base);  // position relative to node `first`
  const double u0 = u, u1 = u - 1.0, u2 = u - 2.0, u3 = u - 3.0;
  w[0] = -u1 * u2 * u3 / 6.0;
  w[1] = u0 * u2 * u3 / 2.0;
  w[2] = -u0 * u1 * u3 / 2.0;
  w[3] = u0 * u1 * u2 / 6.0;
  return true;
}

}  // namespace

double GridFunction::interpolate_log(std::span<const double> y) const {
  const std::size_t n = grid_.dim();
  constexpr std::size_t kMaxDim = 8;
  if (n > kMaxDim) fail(ErrorKind::Shape, "interpolation supports up to 8 axes");
  std::size_t first[kMaxDim];
  double w[kMaxDim][4];
  for (std::size_t i = 0; i < n; ++i) {
    if (!cubic_stencil(grid_, i, y[i], first[i], w[i])) return 0.0;
  }
  if (n == 2) {
    const std::size_t stride = grid_.N[1];
    double acc = 0.0;
    for (int a = 0; a < 4; ++a) {
      const double* row = values_.data() + (first[0] + a) * stride + first[1];
      acc += w[0][a] * (w[1][0] * row[0] + w[1][1] * row[1] + w[1][2] * row[2] + w[1][3] * row[3]);
    }
    return acc;
  }
  const auto strides = grid_.strides();
  std::size_t count = 1;
  for (std::size_t i = 0; i < n; ++i) count *= 4;
  double acc = 0.0;
  for (std::size_t c = 0; c < count; ++c) {
    std::size_t rem = c, off = 0;
    double weight = 1.0;
    for (std::size_t i = n; i-- > 0;) {
      const std::size_t d = rem % 4;
      rem /= 4;
      off += (first[i] + d) * strides[i];
      weight *= w[i][d];
    }
    acc += weight * values_[off];
  }
  return acc;
}

void GridFunction::write_csv(std::ostream& os) const {
  char buf[64];
  os << "# dim " << grid_.dim() << "\n";
  for (std::size_t i = 0; i < grid_.dim(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g", grid_.y0[i], grid_.dy[i]);
    os << "# axis " << (i + 1) << ": " << buf << " " << grid_.N[i] << "\n";
  }
  for (double v : values_) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf << "\n";
  }
}

GridFunction GridFunction::read_csv(std::istream& is) {
  std::string line;
  std::size_t dim = 0;
  LogGrid g;
  std::vector<double> values;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string key;
      ss >> key;
      if (key == "dim") {
        ss >> dim;
        g.y0.assign(dim, 0.0);
        g.dy.assign(dim, 0.0);
        g.N.assign(dim, 0);
      } else if (key == "axis") {
        std::string label;
        ss >> label;  // "i:"
        const std::size_t i = std::stoul(label) - 1;
        if (i >= dim) throw ParseError("axis index out of range", lineno, 1);
        if (!(ss >> g.y0[i] >> g.dy[i] >> g.N[i])) throw ParseError("malformed axis header", lineno, 1);
      }
      continue;
    }
    // strtod rather than stod: subnormal values must round-trip
    char* end = nullptr;
    const double v = std::strtod(line.c_str(), &end);
    while (end && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
    if (end == line.c_str() || *end != '\0') throw ParseError("malformed value '" + line + "'", lineno, 1);
    values.push_back(v);
  }
  if (dim == 0) throw ParseError("missing '# dim' header", 1, 1);
  return GridFunction(std::move(g), std::move(values));
}

void GridFunction::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::Io, "cannot write " + path);
  write_csv(os);
  if (!os) fail(ErrorKind::Io, "write failed for " + path);
}

GridFunction GridFunction::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Io, "cannot read " + path);
  return read_csv(is);
}

unsigned thread_count() {
  if (const char* env = std::getenv("MELLIN_RADON_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return 1;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  const unsigned threads = std::min<std::size_t>(thread_count(), std::max<std::size_t>(count, 1));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  // The error reported is the one from the lowest failing index, so failures
  // are independent of scheduling.
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = count;
  std::exception_ptr error;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (i < failed_at) {
            failed_at = i;
            error = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace mellin_radon
