#include "mellin_radon/scene.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mellin_radon/errors.hpp"

namespace mellin_radon {

namespace {

std::vector<double> param(const Params& p, const std::string& key, std::size_t n, double fallback) {
  auto it = p.find(key);
  if (it == p.end()) return std::vector<double>(n, fallback);
  if (it->second.size() == 1) return std::vector<double>(n, it->second.front());
  if (it->second.size() != n) {
    fail(ErrorKind::Shape, "parameter '" + key + "' needs 1 or " + std::to_string(n) + " values");
  }
  return it->second;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct Entry {
  std::string value;
  int line = 0;
  int column = 0;
};

using Section = std::map<std::string, Entry>;

std::vector<double> numbers(const Entry& e) {
  std::vector<double> out;
  std::istringstream is(e.value);
  std::string tok;
  while (is >> tok) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw ParseError("expected a number, found '" + tok + "'", e.line, e.column);
    out.push_back(v);
  }
  if (out.empty()) throw ParseError("expected at least one number", e.line, e.column);
  return out;
}

double number(const Entry& e) {
  const auto v = numbers(e);
  if (v.size() != 1) throw ParseError("expected a single number", e.line, e.column);
  return v.front();
}

bool flag(const Entry& e) {
  if (e.value == "1" || e.value == "true" || e.value == "yes") return true;
  if (e.value == "0" || e.value == "false" || e.value == "no") return false;
  throw ParseError("expected a boolean, found '" + e.value + "'", e.line, e.column);
}

void check_keys(const Section& s, const std::string& name, std::initializer_list<const char*> allowed) {
  for (const auto& [key, e] : s) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ParseError("unknown key '" + key + "' in [" + name + "]", e.line, e.column);
  }
}

std::vector<double> broadcast(const Entry& e, std::size_t n) {
  auto v = numbers(e);
  if (v.size() == 1) v.assign(n, v.front());
  if (v.size() != n) {
    throw ParseError("expected 1 or " + std::to_string(n) + " values", e.line, e.column);
  }
  return v;
}

LogGrid grid_section(const Section& s, const std::string& name, std::size_t n) {
  check_keys(s, name, {"ymin", "ymax", "N"});
  for (const char* k : {"ymin", "ymax", "N"}) {
    if (!s.count(k)) fail(ErrorKind::Parse, std::string("[") + name + "] needs '" + k + "'");
  }
  const auto lo = broadcast(s.at("ymin"), n), hi = broadcast(s.at("ymax"), n), N = broadcast(s.at("N"), n);
  LogGrid g;
  for (std::size_t i = 0; i < n; ++i) {
    if (N[i] < 2 || N[i] != std::floor(N[i]) || !(hi[i] > lo[i])) {
      const auto& e = s.at("N");
      throw ParseError("grid axis " + std::to_string(i + 1) + " needs ymax > ymin and integer N >= 2", e.line, e.column);
    }
    g.y0.push_back(lo[i]);
    g.N.push_back(static_cast<std::size_t>(N[i]));
    g.dy.push_back((hi[i] - lo[i]) / (N[i] - 1));
  }
  g.validate();
  return g;
}

std::string resolve(const std::string& base, const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base) / p).string();
}

}  // namespace

CostFunction synthetic_family(const std::string& name, std::size_t n, const Params& params) {
  if (name == "gamma-product") {
    const auto k = param(params, "k", n, 2.0), th = param(params, "theta", n, 1.0);
    std::vector<double> norm(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!(k[i] > -1.0) || !(th[i] > 0.0)) fail(ErrorKind::Domain, "gamma-product needs k > -1 and theta > 0");
      norm[i] = std::lgamma(k[i] + 1.0) + (k[i] + 1.0) * std::log(th[i]);
    }
    return [=](std::span<const double> x) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += k[i] * std::log(x[i]) - x[i] / th[i] - norm[i];
      return std::exp(s);
    };
  }
  if (name == "lognormal-bump") {
    const auto mu = param(params, "mu", n, 0.0), sg = param(params, "sigma", n, 0.5);
    for (double v : sg) {
      if (!(v > 0.0)) fail(ErrorKind::Domain, "lognormal-bump needs sigma > 0");
    }
    return [=](std::span<const double> x) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = (std::log(x[i]) - mu[i]) / sg[i];
        s += 0.5 * d * d;
      }
      return std::exp(-s);
    };
  }
  if (name == "power-times-exponential") {
    const auto a = param(params, "power", n, 0.0), b = param(params, "rate", n, 1.0);
    for (double v : b) {
      if (!(v >= 0.0)) fail(ErrorKind::Domain, "power-times-exponential needs rate >= 0");
    }
    return [=](std::span<const double> x) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += a[i] * std::log(x[i]) - b[i] * x[i];
      return std::exp(s);
    };
  }
  if (name == "zero") return [](std::span<const double>) { return 0.0; };
  fail(ErrorKind::Argument, "unknown synthetic family '" + name + "'");
}

KernelSpec two_exponential_kernel(double dy) {
  const double y0 = -30.0, y1 = 6.0;
  const auto N = static_cast<std::size_t>(std::round((y1 - y0) / dy)) + 1;
  std::vector<double> v(N);
  const double e = std::exp(1.0);
  for (std::size_t k = 0; k < N; ++k) {
    const double t = std::exp(y0 + static_cast<double>(k) * dy);
    v[k] = std::exp(-t) - e * std::exp(-e * t);
  }
  return KernelSpec::sampled(y0, dy, std::move(v));
}

KernelSpec load_kernel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open kernel file '" + path + "'");
  std::vector<double> y, h;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    double a = 0, b = 0;
    char comma = 0;
    std::istringstream is(line);
    if (!(is >> a >> comma >> b) || comma != ',') {
      if (y.empty() && lineno == 1) continue;  // header
      throw ParseError("expected 'log_t,h'", lineno, 1);
    }
    y.push_back(a);
    h.push_back(b);
  }
  if (y.size() < 4) fail(ErrorKind::Shape, "kernel file needs at least 4 rows");
  const double dy = (y.back() - y.front()) / static_cast<double>(y.size() - 1);
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (std::abs(y[k] - (y.front() + static_cast<double>(k) * dy)) > 1e-9 * std::max(1.0, std::abs(y[k]))) {
      fail(ErrorKind::Shape, "kernel file must be uniform in log t");
    }
  }
  return KernelSpec::sampled(y.front(), dy, std::move(h));
}

std::size_t SceneConfig::dim() const { return q().dimension(); }

const CostExpr& SceneConfig::q() const {
  if (!cost) fail(ErrorKind::Parse, "scene has no [cost] expression");
  return *cost;
}

LogGrid SceneConfig::p_grid() const { return pgrid ? *pgrid : reflected_grid(grid); }

std::vector<double> SceneConfig::plane() const { return c.empty() ? std::vector<double>(dim(), 0.5) : c; }

GridFunction SceneConfig::sample_f() const {
  if (!f_path.empty()) {
    auto f = GridFunction::load(f_path);
    if (!(f.grid() == grid) && !(f.grid().same_lattice(grid) && f.grid().y0 == grid.y0)) {
      fail(ErrorKind::Shape, "f file grid does not match [grid]");
    }
    return f;
  }
  return GridFunction::sample(grid, synthetic_family(f_family, dim(), f_params));
}

SceneConfig SceneConfig::parse(const std::string& text, const std::string& base_dir) {
  std::map<std::string, Section> sections;
  std::string current;
  std::istringstream is(text);
  std::string raw;
  int lineno = 0;
  // pending multi-line value
  std::string pending_key;
  Entry pending;
  int depth = 0;
  auto paren_balance = [](const std::string& s) {
    int d = 0;
    for (char ch : s) d += ch == '(' ? 1 : ch == ')' ? -1 : 0;
    return d;
  };
  while (std::getline(is, raw)) {
    ++lineno;
    std::string line = raw;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    if (!pending_key.empty()) {
      pending.value += " " + trim(line);
      depth += paren_balance(line);
      if (depth <= 0) {
        sections[current][pending_key] = pending;
        pending_key.clear();
      }
      continue;
    }
    const std::string t = trim(line);
    if (t.empty()) continue;
    const int col = static_cast<int>(line.find_first_not_of(" \t")) + 1;
    if (t.front() == '[') {
      if (t.back() != ']') throw ParseError("unterminated section header", lineno, col);
      current = trim(t.substr(1, t.size() - 2));
      static const char* known[] = {"cost", "grid", "pgrid", "f", "kernel", "options"};
      bool ok = false;
      for (const char* k : known) ok = ok || current == k;
      if (!ok) throw ParseError("unknown section [" + current + "]", lineno, col);
      sections[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", lineno, col);
    if (current.empty()) throw ParseError("key outside of a section", lineno, col);
    const std::string key = trim(line.substr(0, eq));
    Entry e;
    e.value = trim(line.substr(eq + 1));
    e.line = lineno;
    e.column = static_cast<int>(line.find_first_not_of(" \t", eq + 1)) + 1;
    if (sections[current].count(key)) throw ParseError("duplicate key '" + key + "'", lineno, col);
    depth = paren_balance(e.value);
    if (depth > 0) {
      pending_key = key;
      pending = e;
      continue;
    }
    sections[current][key] = e;
  }
  if (!pending_key.empty()) throw ParseError("unbalanced parentheses in '" + pending_key + "'", pending.line, pending.column);

  SceneConfig sc;
  sc.base_dir = base_dir;
  if (!sections.count("cost") || !sections["cost"].count("expr")) fail(ErrorKind::Parse, "scene needs [cost] expr = ...");
  check_keys(sections["cost"], "cost", {"expr"});
  {
    const Entry& e = sections["cost"]["expr"];
    try {
      sc.cost = CostExpr::parse(e.value);
    } catch (const ParseError& pe) {
      // position inside the expression, shifted onto the config line
      const int line = e.line + pe.line() - 1;
      const int column = pe.line() == 1 ? e.column + pe.column() - 1 : pe.column();
      std::string msg = pe.what();
      if (auto p = msg.find(": "); p != std::string::npos) msg = msg.substr(p + 2);
      throw ParseError(msg, line, column);
    } catch (const Error& err) {
      // structural errors carry "line L, column C: " relative to the expression
      int l = 0, c = 0, used = 0;
      const std::string msg = err.what();
      if (std::sscanf(msg.c_str(), "line %d, column %d: %n", &l, &c, &used) == 2 && used > 0) {
        const int line = e.line + l - 1;
        const int column = l == 1 ? e.column + c - 1 : c;
        throw Error(err.kind(), "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                                    msg.substr(static_cast<std::size_t>(used)));
      }
      throw;
    }
  }
  const std::size_t n = sc.dim();
  if (!sections.count("grid")) fail(ErrorKind::Parse, "scene needs a [grid] section");
  sc.grid = grid_section(sections["grid"], "grid", n);
  if (sections.count("pgrid")) sc.pgrid = grid_section(sections["pgrid"], "pgrid", n);

  if (sections.count("f")) {
    auto& s = sections["f"];
    check_keys(s, "f", {"family", "path", "k", "theta", "mu", "sigma", "power", "rate"});
    if (s.count("path")) sc.f_path = resolve(base_dir, s["path"].value);
    if (s.count("family")) sc.f_family = s["family"].value;
    for (const char* k : {"k", "theta", "mu", "sigma", "power", "rate"}) {
      if (s.count(k)) sc.f_params[k] = broadcast(s[k], n);
    }
    if (sc.f_path.empty()) {
      try {
        synthetic_family(sc.f_family, n, sc.f_params);
      } catch (const Error& err) {
        const Entry& e = s.count("family") ? s["family"] : s.begin()->second;
        throw ParseError(err.what(), e.line, e.column);
      }
    }
  }

  double kernel_p0 = 1.0;
  if (sections.count("kernel")) {
    auto& s = sections["kernel"];
    check_keys(s, "kernel", {"type", "p0", "path"});
    const std::string type = s.count("type") ? s["type"].value : "exponential";
    if (s.count("p0")) kernel_p0 = number(s["p0"]);
    if (type == "exponential") sc.kernel = KernelSpec::exponential();
    else if (type == "profit") sc.kernel = KernelSpec::profit(kernel_p0);
    else if (type == "two-exponential") sc.kernel = two_exponential_kernel();
    else if (type == "csv") {
      if (!s.count("path")) throw ParseError("kernel type csv needs 'path'", s["type"].line, s["type"].column);
      sc.kernel = load_kernel_csv(resolve(base_dir, s["path"].value));
    } else if (type != "none") {
      throw ParseError("unknown kernel type '" + type + "'", s["type"].line, s["type"].column);
    }
  }

  if (sections.count("options")) {
    auto& s = sections["options"];
    check_keys(s, "options",
               {"c", "r", "epsilon", "taper", "cutoff", "scheme", "coverage", "p0", "scan_radius", "scan_resolution",
                "kernel_scan_radius", "kernel_scan_resolution"});
    if (s.count("c")) {
      sc.c = broadcast(s["c"], n);
      for (double v : sc.c) {
        if (!(v > 0.0)) throw ParseError("plane c must be positive", s["c"].line, s["c"].column);
      }
    }
    try {
      if (s.count("r")) sc.r = WeightedNormSpec::parse_r(s["r"].value);
      if (s.count("scheme")) sc.radon.scheme = radon_scheme_from_string(s["scheme"].value);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& err) {
      const Entry& e = s.count("r") ? s["r"] : s["scheme"];
      throw ParseError(err.what(), e.line, e.column);
    }
    if (s.count("epsilon")) sc.inversion.epsilon = number(s["epsilon"]);
    if (s.count("taper")) sc.inversion.taper = flag(s["taper"]);
    if (s.count("cutoff")) sc.inversion.cutoff = number(s["cutoff"]);
    if (s.count("coverage")) {
      const auto& v = s["coverage"].value;
      if (v == "throw") sc.coverage = CoveragePolicy::Throw;
      else if (v == "zero") sc.coverage = CoveragePolicy::Zero;
      else throw ParseError("coverage must be 'throw' or 'zero'", s["coverage"].line, s["coverage"].column);
    }
    if (s.count("p0")) sc.p0 = number(s["p0"]);
    if (s.count("scan_radius")) sc.scan.radius = number(s["scan_radius"]);
    if (s.count("scan_resolution")) sc.scan.resolution = static_cast<std::size_t>(number(s["scan_resolution"]));
    if (s.count("kernel_scan_radius")) sc.scan.kernel_radius = number(s["kernel_scan_radius"]);
    if (s.count("kernel_scan_resolution")) {
      sc.scan.kernel_resolution = static_cast<std::size_t>(number(s["kernel_scan_resolution"]));
    }
  }
  if (!(sc.p0 > 0.0)) fail(ErrorKind::Domain, "p0 must be positive");
  sc.inversion.c = sc.plane();
  sc.inversion.validate(n);
  return sc;
}

const char* demo_scene_text() {
  return R"(# n = 2 demo scene: gamma-type capacities under a linear CES cost
[cost]
expr = (ces :alpha 1 :C 1 :a (0.5 0.5) (axis 1) (axis 2))

[grid]
ymin = -10
ymax = 10
N = 256

[f]
family = gamma-product
k = 2
theta = 1

[kernel]
type = exponential

[options]
c = 1 1
r = 2
epsilon = 1e-4
p0 = 1
coverage = zero
)";
}

SceneConfig SceneConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open scene file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), std::filesystem::path(path).parent_path().string());
}

}  // namespace mellin_radon
