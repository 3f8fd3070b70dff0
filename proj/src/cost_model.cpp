#include "mellin_radon/cost_model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "mellin_radon/errors.hpp"

namespace mellin_radon {

namespace {

constexpr double kWeightSumTol = 1e-9;
// Below this alpha the node is evaluated as a log-sum-exp.
constexpr double kLogSpaceAlpha = 0.05;

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

CostExpr CostExpr::axis(int one_based) {
  if (one_based < 1) fail(ErrorKind::Structural, "axis index must be >= 1");
  return CostExpr(one_based - 1);
}

CostExpr CostExpr::ces(double alpha, double C, std::vector<double> a,
                       std::vector<CostExpr> children) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    fail(ErrorKind::Domain, "CES alpha must lie in (0, 1], got " + fmt_double(alpha) +
                                " (alpha = 0 and alpha = -inf have unbounded level sets)");
  }
  if (!(C > 0.0) || !std::isfinite(C)) fail(ErrorKind::Domain, "CES constant C must be positive");
  if (a.size() != children.size()) {
    fail(ErrorKind::Structural, "CES node has " + std::to_string(a.size()) + " weights but " +
                                    std::to_string(children.size()) + " children");
  }
  if (a.size() < 2) fail(ErrorKind::Structural, "CES node needs at least two arguments");
  double sum = 0.0;
  for (double w : a) {
    if (!(w > 0.0)) fail(ErrorKind::Domain, "CES weights must be positive");
    sum += w;
  }
  if (std::abs(sum - 1.0) > kWeightSumTol) {
    fail(ErrorKind::Domain, "CES weights must sum to 1, got " + fmt_double(sum));
  }
  auto node = std::make_shared<Ces>();
  node->alpha = alpha;
  node->C = C;
  node->a = std::move(a);
  node->children = std::move(children);
  for (const auto& child : node->children) {
    if (child.is_axis()) {
      node->axes.push_back(child.axis_index());
    } else {
      const auto& sub = child.node().axes;
      node->axes.insert(node->axes.end(), sub.begin(), sub.end());
    }
  }
  std::sort(node->axes.begin(), node->axes.end());
  auto dup = std::adjacent_find(node->axes.begin(), node->axes.end());
  if (dup != node->axes.end()) {
    fail(ErrorKind::Structural, "axis " + std::to_string(*dup + 1) + " appears more than once");
  }
  for (double w : node->a) node->log_a.push_back(std::log(w));
  node->log_C = std::log(node->C);
  return CostExpr(std::shared_ptr<const Ces>(std::move(node)));
}

int CostExpr::axis_index() const {
  if (!is_axis()) fail(ErrorKind::Structural, "not an axis leaf");
  return std::get<int>(node_);
}

const CostExpr::Ces& CostExpr::node() const {
  if (is_axis()) fail(ErrorKind::Structural, "not a CES node");
  return *std::get<std::shared_ptr<const Ces>>(node_);
}

std::size_t CostExpr::dimension() const noexcept {
  if (is_axis()) return 1;
  return std::get<std::shared_ptr<const Ces>>(node_)->axes.size();
}

bool CostExpr::is_linear() const noexcept {
  if (is_axis()) return true;
  const auto& n = *std::get<std::shared_ptr<const Ces>>(node_);
  if (n.alpha != 1.0) return false;
  return std::all_of(n.children.begin(), n.children.end(),
                     [](const CostExpr& c) { return c.is_linear(); });
}

namespace {

template <typename Leaf>
double eval_node(const CostExpr& e, const Leaf& leaf) {
  if (e.is_axis()) return leaf(e.axis_index());
  const auto& n = e.node();
  const std::size_t k = n.children.size();
  if (n.alpha == 1.0) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += n.a[j] * eval_node(n.children[j], leaf);
    return n.C * s;
  }
  if (n.alpha < kLogSpaceAlpha) {
    // log-sum-exp of log a_j + alpha log u_j
    double stack_terms[64];
    std::vector<double> heap_terms(k > 64 ? k : 0);
    double* t = k <= 64 ? stack_terms : heap_terms.data();
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      t[j] = std::log(n.a[j]) + n.alpha * std::log(eval_node(n.children[j], leaf));
      mx = std::max(mx, t[j]);
    }
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(t[j] - mx);
    return n.C * std::exp((mx + std::log(s)) / n.alpha);
  }
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) s += n.a[j] * std::pow(eval_node(n.children[j], leaf), n.alpha);
  return n.C * std::pow(s, 1.0 / n.alpha);
}

// Adds scale * d(value)/dx into grad; returns the node value.
double grad_node(const CostExpr& e, std::span<const double> x, double scale,
                 std::span<double> grad, bool accumulate) {
  if (e.is_axis()) {
    if (accumulate) grad[e.axis_index()] += scale;
    return x[e.axis_index()];
  }
  const auto& n = e.node();
  const std::size_t k = n.children.size();
  std::vector<double> u(k);
  std::span<double> none;
  for (std::size_t j = 0; j < k; ++j) u[j] = grad_node(n.children[j], x, 0.0, none, false);
  // Softmax-style weights w_j = a_j u_j^alpha / sum_i a_i u_i^alpha; dq/du_j = q w_j / u_j.
  std::vector<double> lw(k);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    lw[j] = std::log(n.a[j]) + n.alpha * std::log(u[j]);
    mx = std::max(mx, lw[j]);
  }
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) s += std::exp(lw[j] - mx);
  const double q = n.C * std::exp((mx + std::log(s)) / n.alpha);
  if (accumulate) {
    for (std::size_t j = 0; j < k; ++j) {
      const double w = std::exp(lw[j] - mx) / s;
      grad_node(n.children[j], x, scale * q * w / u[j], grad, true);
    }
  }
  return q;
}

}  // namespace

double CostExpr::value(std::span<const double> x) const {
  return eval_node(*this, [&](int i) { return x[i]; });
}

double CostExpr::value_scaled(std::span<const double> p, std::span<const double> x) const {
  return eval_node(*this, [&](int i) { return p[i] * x[i]; });
}

double CostExpr::log_value_log(std::span<const double> w) const {
  if (is_axis()) return w[axis_index()];
  const auto& n = node();
  const std::size_t k = n.children.size();
  double stack_terms[64];
  std::vector<double> heap_terms(k > 64 ? k : 0);
  double* t = k <= 64 ? stack_terms : heap_terms.data();
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    t[j] = n.log_a[j] + n.alpha * n.children[j].log_value_log(w);
    mx = std::max(mx, t[j]);
  }
  if (!std::isfinite(mx)) return n.log_C + mx / n.alpha;
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) s += t[j] == mx ? 1.0 : std::exp(t[j] - mx);
  return n.log_C + (mx + std::log(s)) / n.alpha;
}

void CostExpr::gradient(std::span<const double> x, std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  grad_node(*this, x, 1.0, grad, true);
}

std::complex<double> CostExpr::log_value_complex(std::span<const std::complex<double>> w) const {
  if (is_axis()) return w[axis_index()];
  const auto& n = node();
  std::complex<double> s = 0.0;
  for (std::size_t j = 0; j < n.a.size(); ++j) s += n.a[j] * std::exp(n.alpha * n.children[j].log_value_complex(w));
  return n.log_C + std::log(s) / n.alpha;
}

std::string CostExpr::to_string() const {
  if (is_axis()) return "(axis " + std::to_string(axis_index() + 1) + ")";
  const auto& n = node();
  std::string out = "(ces :alpha " + fmt_double(n.alpha) + " :C " + fmt_double(n.C) + " :a (";
  for (std::size_t j = 0; j < n.a.size(); ++j) {
    if (j) out += ' ';
    out += fmt_double(n.a[j]);
  }
  out += ")";
  for (const auto& c : n.children) out += " " + c.to_string();
  out += ")";
  return out;
}

std::uint64_t CostExpr::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : to_string()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

// ---------------------------------------------------------------- parsing

namespace {

struct Token {
  enum Type { LParen, RParen, Symbol, End } type;
  std::string text;
  int line;
  int column;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_space();
    Token t{Token::End, "", line_, col_};
    if (pos_ >= src_.size()) return t;
    const char c = src_[pos_];
    if (c == '(' || c == ')') {
      t.type = c == '(' ? Token::LParen : Token::RParen;
      t.text = std::string(1, c);
      advance();
      return t;
    }
    t.type = Token::Symbol;
    while (pos_ < src_.size() && !std::isspace(static_cast<unsigned char>(src_[pos_])) &&
           src_[pos_] != '(' && src_[pos_] != ')' && src_[pos_] != ';') {
      t.text += src_[pos_];
      advance();
    }
    return t;
  }

  Token peek() {
    auto save = std::tuple(pos_, line_, col_);
    Token t = next();
    std::tie(pos_, line_, col_) = save;
    return t;
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  void skip_space() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == ';' || c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : lex_(src) {}

  CostExpr parse_root() {
    CostExpr e = parse_expr();
    Token t = lex_.next();
    if (t.type != Token::End) throw ParseError("unexpected trailing input '" + t.text + "'", t.line, t.column);
    if (e.is_axis()) throw ParseError("a cost expression needs a CES node at the root", 1, 1);
    const auto& axes = e.node().axes;
    for (std::size_t i = 0; i < axes.size(); ++i) {
      if (axes[i] != static_cast<int>(i)) {
        fail(ErrorKind::Structural, "axis indices must form a permutation of 1.." +
                                        std::to_string(axes.size()) + "; axis " +
                                        std::to_string(i + 1) + " is missing");
      }
    }
    return e;
  }

 private:
  Token expect(Token::Type type, const char* what) {
    Token t = lex_.next();
    if (t.type != type) {
      throw ParseError(std::string("expected ") + what + ", found '" +
                           (t.type == Token::End ? std::string("end of input") : t.text) + "'",
                       t.line, t.column);
    }
    return t;
  }

  double number(const Token& t) {
    double v = 0.0;
    const char* first = t.text.data();
    const char* last = first + t.text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw ParseError("expected a number, found '" + t.text + "'", t.line, t.column);
    return v;
  }

  CostExpr parse_expr() {
    Token open = expect(Token::LParen, "'('");
    Token head = expect(Token::Symbol, "'ces' or 'axis'");
    if (head.text == "axis") {
      Token idx = expect(Token::Symbol, "axis index");
      double v = number(idx);
      if (v < 1 || v != std::floor(v)) throw ParseError("axis index must be a positive integer", idx.line, idx.column);
      expect(Token::RParen, "')'");
      return CostExpr::axis(static_cast<int>(v));
    }
    if (head.text != "ces") throw ParseError("unknown node '" + head.text + "'", head.line, head.column);

    double alpha = 0, C = 0;
    bool has_alpha = false, has_C = false, has_a = false;
    std::vector<double> a;
    while (lex_.peek().type == Token::Symbol) {
      Token key = lex_.next();
      if (key.text == ":alpha") {
        Token v = expect(Token::Symbol, "alpha value");
        alpha = number(v);
        if (!(alpha > 0.0 && alpha <= 1.0)) {
          throw ParseError("alpha = " + v.text + " violates alpha in (0, 1] (required for bounded level sets)", v.line, v.column);
        }
        has_alpha = true;
      } else if (key.text == ":C") {
        Token v = expect(Token::Symbol, "C value");
        C = number(v);
        if (!(C > 0.0)) throw ParseError("C must be positive", v.line, v.column);
        has_C = true;
      } else if (key.text == ":a") {
        expect(Token::LParen, "'(' opening the weight list");
        while (lex_.peek().type == Token::Symbol) {
          Token v = lex_.next();
          double w = number(v);
          if (!(w > 0.0)) throw ParseError("weights must be positive", v.line, v.column);
          a.push_back(w);
        }
        Token close = expect(Token::RParen, "')' closing the weight list");
        double sum = std::accumulate(a.begin(), a.end(), 0.0);
        if (std::abs(sum - 1.0) > kWeightSumTol) {
          throw ParseError("weights must sum to 1 (sum is " + fmt_double(sum) + ")", close.line, close.column);
        }
        has_a = true;
      } else {
        throw ParseError("unknown attribute '" + key.text + "'", key.line, key.column);
      }
    }
    if (!has_alpha || !has_C || !has_a) {
      throw ParseError("ces node requires :alpha, :C and :a", open.line, open.column);
    }
    std::vector<CostExpr> children;
    while (lex_.peek().type == Token::LParen) children.push_back(parse_expr());
    Token close = expect(Token::RParen, "')' closing the ces node");
    if (children.size() != a.size()) {
      throw ParseError("ces node has " + std::to_string(a.size()) + " weights but " +
                           std::to_string(children.size()) + " children",
                       close.line, close.column);
    }
    try {
      return CostExpr::ces(alpha, C, std::move(a), std::move(children));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Structural) {
        fail(ErrorKind::Structural, "line " + std::to_string(open.line) + ", column " +
                                        std::to_string(open.column) + ": " + e.what());
      }
      throw ParseError(e.what(), open.line, open.column);
    }
  }

  Lexer lex_;
};

}  // namespace

CostExpr CostExpr::parse(std::string_view text) { return Parser(text).parse_root(); }

// ---------------------------------------------------------------- checked ops

namespace {
void check_point(const CostExpr& q, std::span<const double> x) {
  if (x.size() != q.dimension()) {
    fail(ErrorKind::Shape, "point has " + std::to_string(x.size()) + " coordinates, expression has " +
                               std::to_string(q.dimension()) + " axes");
  }
  for (double v : x) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorKind::Domain, "cost functions are defined on the open positive orthant");
  }
}
}  // namespace

double eval_cost(const CostExpr& q, std::span<const double> x) {
  check_point(q, x);
  return q.value(x);
}

std::vector<double> grad_cost(const CostExpr& q, std::span<const double> x) {
  check_point(q, x);
  std::vector<double> g(x.size());
  q.gradient(x, g);
  return g;
}

// ---------------------------------------------------------------- validation

namespace {

ValidationReport probe(const CostFunction& q, std::size_t n, int sample_count, std::uint64_t seed) {
  if (sample_count < 1) fail(ErrorKind::Argument, "sample_count must be >= 1");
  ValidationReport rep;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> logx(std::log(1e-2), std::log(1e2));
  std::uniform_real_distribution<double> loglam(std::log(1e-3), std::log(1e3));
  std::vector<double> x(n), lx(n);
  for (int s = 0; s < sample_count; ++s) {
    for (auto& v : x) v = std::exp(logx(rng));
    const double lam = std::exp(loglam(rng));
    for (std::size_t i = 0; i < n; ++i) lx[i] = lam * x[i];
    const double qx = q(x);
    const double qlx = q(lx);
    if (!(qx > 0.0) || !(qlx > 0.0)) {
      rep.positivity_ok = false;
      continue;
    }
    rep.homogeneity_max_residual =
        std::max(rep.homogeneity_max_residual, std::abs(qlx - lam * qx) / (lam * qx));
  }
  // Ray probes: q must grow without bound along every axis. Small CES
  // exponents only reach their linear asymptote far out, hence the long ray.
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> lo(n, 1.0), hi(n, 1.0);
    lo[i] = 1e3;
    hi[i] = 1e200;
    const double ratio = q(hi) / q(lo);
    rep.ray_growth.push_back(ratio);
    if (!(ratio > 1e3)) rep.level_set_bounded = false;
  }
  return rep;
}

}  // namespace

ValidationReport validate_cost(const CostExpr& q, int sample_count, std::uint64_t seed) {
  auto rep = probe([&](std::span<const double> x) { return q.value(x); }, q.dimension(),
                   sample_count, seed);
  // Every node has alpha in (0, 1] by construction, so level sets are bounded.
  rep.analytic_bounded = true;
  return rep;
}

ValidationReport validate_cost(const CostFunction& q, std::size_t dimension, int sample_count,
                               std::uint64_t seed) {
  return probe(q, dimension, sample_count, seed);
}

// ---------------------------------------------------------------- duality

double ProductionSpec::operator()(std::span<const double> y) const {
  switch (kind) {
    case Kind::Linear: {
      double s = 0.0;
      for (std::size_t j = 0; j < b.size(); ++j) s += b[j] * y[j];
      return s;
    }
    case Kind::Leontief: {
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < b.size(); ++j) m = std::min(m, y[j] / b[j]);
      return m;
    }
    case Kind::Ces: {
      double s = 0.0;
      for (std::size_t j = 0; j < b.size(); ++j) {
        if (y[j] <= 0.0) {
          if (rho < 0.0) return 0.0;
          continue;
        }
        s += b[j] * std::pow(y[j], rho);
      }
      return s > 0.0 ? std::pow(s, 1.0 / rho) : 0.0;
    }
  }
  return 0.0;
}

namespace {

void check_production(const ProductionSpec& F0) {
  if (F0.b.size() < 2) fail(ErrorKind::Shape, "production function needs n >= 2 inputs");
  for (double w : F0.b) {
    if (!(w > 0.0)) fail(ErrorKind::Domain, "production weights must be positive");
  }
  if (F0.kind == ProductionSpec::Kind::Ces && !(F0.rho <= 1.0 && F0.rho != 0.0)) {
    fail(ErrorKind::Domain, "CES production requires rho <= 1 and rho != 0");
  }
}

// Visits the grid points of the simplex {k / m : sum k = m} in lexicographic order.
template <typename Visit>
void simplex_points(std::vector<int>& k, std::size_t pos, int left, Visit& visit) {
  if (pos + 1 == k.size()) {
    k[pos] = left;
    visit(k);
    return;
  }
  for (int v = 0; v <= left; ++v) {
    k[pos] = v;
    simplex_points(k, pos + 1, left - v, visit);
  }
}

template <typename Visit>
void for_each_simplex_point(std::size_t n, int m, Visit&& visit) {
  std::vector<int> k(n, 0);
  simplex_points(k, 0, m, visit);
}

std::size_t binom(std::size_t a, std::size_t b) {
  double r = 1.0;
  for (std::size_t i = 1; i <= b; ++i) r = r * static_cast<double>(a - b + i) / static_cast<double>(i);
  return static_cast<std::size_t>(std::llround(r));
}

}  // namespace

double cost_from_production(const ProductionSpec& F0, std::span<const double> x,
                            const DualityOptions& opts) {
  check_production(F0);
  const std::size_t n = F0.dimension();
  if (x.size() != n) fail(ErrorKind::Shape, "x dimension does not match the production function");
  for (double v : x) {
    if (!(v > 0.0)) fail(ErrorKind::Domain, "x must be in the positive orthant");
  }

  int m = opts.grid_resolution;
  if (m <= 0) {
    m = 400;
    while (m > 4 && binom(static_cast<std::size_t>(m) + n - 1, n - 1) > 200000) m /= 2;
  }

  auto objective = [&](std::span<const double> y) {
    const double f = F0(y);
    if (!(f > 0.0)) return std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += x[j] * y[j];
    return s / f;
  };

  std::vector<double> y(n), best(n);
  double best_val = std::numeric_limits<double>::infinity();
  for_each_simplex_point(n, m, [&](const std::vector<int>& k) {
    for (std::size_t j = 0; j < n; ++j) y[j] = static_cast<double>(k[j]) / m;
    const double v = objective(y);
    if (v < best_val) {  // strict: first (lexicographically smallest) index wins ties
      best_val = v;
      best = y;
    }
  });
  if (!std::isfinite(best_val)) {
    fail(ErrorKind::DegenerateProduction, "F_0 vanishes on the whole simplex");
  }

  // Mass transfers keep y on the simplex; the step halves once no transfer
  // improves the objective.
  double step = 1.0 / m;
  for (int halvings = 0; halvings < opts.refinement_steps && step > 1e-15;) {
    bool improved = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double h = std::min(step, best[j]);
        if (h <= 0.0) continue;
        y = best;
        y[i] += h;
        y[j] -= h;
        const double v = objective(y);
        if (v < best_val) {
          best_val = v;
          best = y;
          improved = true;
        }
      }
    }
    // One coordinate against all others in proportion: needed where several
    // ratios tie at a kink (Leontief) and no pairwise move helps.
    for (std::size_t j = 0; j < n; ++j) {
      for (double sign : {1.0, -1.0}) {
        const double rest = 1.0 - best[j];
        if (rest <= 0.0) continue;
        const double h = sign > 0 ? std::min(step, rest) : std::min(step, best[j]);
        if (h <= 0.0) continue;
        y = best;
        y[j] += sign * h;
        for (std::size_t k = 0; k < n; ++k) {
          if (k != j) y[k] -= sign * h * best[k] / rest;
        }
        bool inside = true;
        for (double v : y) inside = inside && v >= 0.0;
        if (!inside) continue;
        const double v = objective(y);
        if (v < best_val) {
          best_val = v;
          best = y;
          improved = true;
        }
      }
    }
    if (!improved) {
      step *= 0.5;
      ++halvings;
    }
  }
  return best_val;
}

}  // namespace mellin_radon
