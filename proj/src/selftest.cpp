#include "mellin_radon/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>

#include "mellin_radon/diagnostics.hpp"
#include "mellin_radon/errors.hpp"
#include "mellin_radon/inversion.hpp"
#include "mellin_radon/mellin.hpp"
#include "mellin_radon/scene.hpp"
#include "mellin_radon/transforms.hpp"

namespace mellin_radon {

extern const char* const kToleranceJson;

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

CheckResult upper(int criterion, std::string identity, double residual, const char* tol_id, std::string detail = {}) {
  CheckResult r;
  r.criterion = criterion;
  r.identity = std::move(identity);
  r.residual = residual;
  r.tolerance = tolerance(tol_id);
  r.pass = std::isfinite(residual) && residual <= r.tolerance;
  r.detail = std::move(detail);
  return r;
}

CheckResult runtime(int criterion, double seconds, const char* tol_id) {
  return upper(criterion, "runtime (s)", seconds, tol_id);
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// One failing stage should not hide the other checks.
CheckList guarded(int criterion, const std::string& name, const std::function<CheckList()>& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    CheckResult r;
    r.criterion = criterion;
    r.identity = name;
    r.residual = std::numeric_limits<double>::infinity();
    r.pass = false;
    r.detail = std::string("error: ") + e.what();
    return {r};
  }
}

const char* const kLinear = "(ces :alpha 1 :C 1 :a (0.5 0.5) (axis 1) (axis 2))";

}  // namespace

const nlohmann::json& tolerance_table() {
  static const nlohmann::json table = nlohmann::json::parse(kToleranceJson);
  return table;
}

double tolerance(std::string_view id) {
  const auto& t = tolerance_table();
  auto it = t.find(std::string(id));
  if (it == t.end()) fail(ErrorKind::Argument, "unknown tolerance id '" + std::string(id) + "'");
  return it->at("value").get<double>();
}

CheckList check_closed_form() {
  return guarded(1, "closed form vs quadrature", [] {
    Stopwatch sw;
    CheckList out;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-10.0, 10.0);
    std::vector<std::array<double, 2>> pts;
    while (pts.size() < 20) {
      const double a = U(rng), b = U(rng);
      if (a * a + b * b <= 100.0) pts.push_back({a, b});
    }
    auto box = QuadratureBox::uniform(2, -30.0, 10.0, 256);
    box.extension = 0.1;
    for (double alpha : {1.0, 0.5, 0.25}) {
      const auto q = CostExpr::ces(alpha, 1.0, {0.5, 0.5}, {CostExpr::axis(1), CostExpr::axis(2)});
      double worst = 0.0;
      for (const auto& p : pts) {
        const std::vector<cplx> z{{1.0, p[0]}, {1.0, p[1]}};
        const cplx closed = mellin_expcost_closed(q, z);
        const cplx quad = mellin_quadrature(
            [&q](std::span<const cplx> w) { return std::exp(-std::exp(q.log_value_complex(w))); }, z, box,
            ces_contour(q, std::vector<double>{p[0], p[1]}));
        worst = std::max(worst, std::abs(quad - closed) / std::abs(closed));
      }
      out.push_back(upper(1, "M e^-q closed form, flat alpha = " + fmt("%g", alpha), worst, "closed_form_flat",
                          "20 points, |xi| <= 10, c = (1, 1)"));
    }
    const auto q = CostExpr::parse(
        "(ces :alpha 1 :C 1 :a (0.5 0.5) (axis 1) (ces :alpha 0.5 :C 1 :a (0.5 0.5) (axis 2) (axis 3)))");
    std::mt19937_64 rng3(11);
    auto box3 = QuadratureBox::uniform(3, -20.0, 10.0, 80);
    box3.extension = 0.05;
    double worst = 0.0;
    for (int k = 0; k < 20;) {
      const double a = U(rng3), b = U(rng3), c = U(rng3);
      if (a * a + b * b + c * c > 100.0) continue;
      ++k;
      const std::vector<cplx> z{{1.0, a}, {1.0, b}, {1.0, c}};
      const cplx closed = mellin_expcost_closed(q, z);
      const std::vector<double> theta{std::copysign(0.8, a), std::copysign(0.8, b), std::copysign(0.8, c)};
      const cplx quad = mellin_quadrature(
          [&q](std::span<const cplx> w) { return std::exp(-std::exp(q.log_value_complex(w))); }, z, box3,
          rotation_contour(theta));
      worst = std::max(worst, std::abs(quad - closed) / std::abs(closed));
    }
    out.push_back(upper(1, "M e^-q closed form, nested n = 3", worst, "closed_form_nested", "20 points, |xi| <= 10"));
    out.push_back(runtime(1, sw.seconds(), "closed_form_runtime"));
    return out;
  });
}

CheckList check_projection() {
  return guarded(2, "projection identities", [] {
    Stopwatch sw;
    CheckList out;
    const auto q = CostExpr::parse(kLinear);
    const auto g = LogGrid::uniform(2, -12.0, 12.0, 256);
    const auto f = GridFunction::sample(g, synthetic_family("gamma-product", 2, {}));
    const auto pg = reflected_grid(g);
    const auto batch = forward_batch(f, q, pg, nullptr, 1.0);
    const std::vector<double> c{0.9, 0.9}, w{0.1, 0.1};
    const auto G = mellin_forward(batch.radon, c);
    const auto P = mellin_forward(batch.profit, c);
    const auto F = mellin_forward(f, w);
    // 20 frequencies from the low band |m_i| <= 6
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> M(-6, 6);
    double wr = 0.0, wp = 0.0;
    std::vector<cplx> z(2);
    for (int k = 0; k < 20; ++k) {
      const int m1 = M(rng), m2 = M(rng);
      const std::size_t flat = static_cast<std::size_t>((m1 + 256) % 256) * 256 + static_cast<std::size_t>((m2 + 256) % 256);
      G.z_at(flat, z);
      const cplx s = z[0] + z[1];
      const cplx rhs = F.values[F.mirror(flat)] * mellin_expcost_closed(q, z);
      wr = std::max(wr, std::abs(complex_gamma(s) * G.values[flat] - rhs) / std::abs(rhs));
      wp = std::max(wp, std::abs(complex_gamma(s + 2.0) * P.values[flat] - rhs) / std::abs(rhs));
    }
    out.push_back(upper(2, "Gamma(s) M(R_q f)(z) = Mf(I-z) M e^-q(z)", wr, "projection_radon",
                        "gamma-product f, linear CES, 256^2, c = (0.9, 0.9)"));
    out.push_back(runtime(2, sw.seconds(), "projection_runtime"));
    out.push_back(upper(3, "Gamma(s+2) M(Pi_q f)(z) = Mf(I-z) M e^-q(z)", wp, "projection_profit", "p0 = 1"));

    const double step = 1e-2;
    double wfd = 0.0;
    const std::array<std::array<double, 2>, 5> ps{{{1.0, 1.0}, {0.5, 2.0}, {2.0, 0.7}, {1.5, 1.5}, {0.8, 0.6}}};
    for (const auto& p : ps) {
      const double p0 = 1.0;
      const double fd = (profit_forward(f, q, p0 + step, p) - 2.0 * profit_forward(f, q, p0, p) +
                         profit_forward(f, q, p0 - step, p)) / (step * step);
      const std::array<double, 2> pp{p[0] / p0, p[1] / p0};
      const double exact = radon_forward(f, q, pp, {.scheme = RadonScheme::RayChart}) / p0;
      wfd = std::max(wfd, std::abs(fd - exact) / std::abs(exact));
    }
    out.push_back(upper(3, "d2 Pi / d p0^2 = R_q f(p / p0) / p0", wfd, "profit_second_derivative", "5 points"));
    return out;
  });
}

CheckList check_coarea_factorization() {
  return guarded(4, "coarea and factorization", [] {
    CheckList out;
    const auto scene = SceneConfig::parse(demo_scene_text());
    const auto f = scene.sample_f();
    double wc = 0.0;
    for (const auto& p : std::vector<std::array<double, 2>>{{1.0, 1.0}, {0.5, 2.0}, {3.0, 0.8}}) {
      wc = std::max(wc, coarea_check(f, scene.q(), p));
    }
    out.push_back(upper(4, "coarea", wc, "coarea", "demo scene, 3 price points"));
    double wf = 0.0;
    const auto exp_k = KernelSpec::exponential();
    const auto prof = KernelSpec::profit(1.0);
    const std::vector<double> one{1.0, 1.0}, x{0.7, 1.8};
    const std::vector<cplx> z1{1.0, 1.0}, z2{{0.6, 1.3}, {0.7, -0.4}};
    wf = std::max(wf, factorization_check(scene.q(), prof, one, z1));
    wf = std::max(wf, factorization_check(scene.q(), prof, x, z2));
    wf = std::max(wf, factorization_check(scene.q(), exp_k, x, z2));
    wf = std::max(wf, factorization_check(scene.q(), KernelSpec::profit(1.7), x, z1));
    out.push_back(upper(4, "kernel-cost factorization", wf, "factorization", "demo cost, exponential and profit kernels"));
    return out;
  });
}

CheckList check_norm_estimates() {
  return guarded(5, "norm estimates", [] {
    CheckList out;
    const WeightedNormSpec::R rs[] = {WeightedNormSpec::R::One, WeightedNormSpec::R::Two, WeightedNormSpec::R::Inf};
    std::array<double, 3> worst{-1e300, -1e300, -1e300};
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto uni = [&](double a, double b) { return a + (b - a) * U(rng); };
    const auto g = LogGrid::uniform(2, -10.0, 10.0, 128);
    const auto h = KernelSpec::exponential();
    const char* families[] = {"gamma-product", "lognormal-bump", "power-times-exponential"};
    for (int s = 0; s < 10; ++s) {
      const double alpha = uni(0.3, 1.0), a1 = uni(0.2, 0.8), C = uni(0.5, 2.0);
      const auto q = CostExpr::ces(alpha, C, {a1, 1.0 - a1}, {CostExpr::axis(1), CostExpr::axis(2)});
      Params prm;
      const std::string fam = families[s % 3];
      if (fam == "gamma-product") prm = {{"k", {uni(0.5, 3.0), uni(0.5, 3.0)}}, {"theta", {uni(0.5, 2.0), uni(0.5, 2.0)}}};
      if (fam == "lognormal-bump") prm = {{"mu", {uni(-1.0, 1.0), uni(-1.0, 1.0)}}, {"sigma", {uni(0.3, 0.8), uni(0.3, 0.8)}}};
      if (fam == "power-times-exponential") prm = {{"power", {uni(0.0, 2.0), uni(0.0, 2.0)}}, {"rate", {uni(0.5, 2.0), uni(0.5, 2.0)}}};
      const auto f = GridFunction::sample(g, synthetic_family(fam, 2, prm));
      const std::vector<double> c{uni(0.3, 0.9), uni(0.3, 0.9)};
      const double p0 = uni(0.5, 2.0);
      const auto reps = prop1_check_all(f, q, &h, c, p0, rs);
      for (std::size_t i = 0; i < reps.size(); ++i) {
        for (const auto& l : reps[i].lines) worst[i] = std::max(worst[i], (l.lhs - l.rhs) / l.rhs);
      }
    }
    for (std::size_t i = 0; i < 3; ++i) {
      out.push_back(upper(5, std::string("norm estimates hold, r = ") + to_string(rs[i]), worst[i], "prop1_slack",
                          "10 random scenes; residual = max (lhs - rhs) / rhs"));
    }
    // extremal function x^(c - I) attains the r = inf bound
    const std::vector<double> c{0.7, 0.8};
    const auto q = CostExpr::parse("(ces :alpha 0.5 :C 1 :a (0.4 0.6) (axis 1) (axis 2))");
    const auto ge = LogGrid::uniform(2, -12.0, 12.0, 128);
    const auto f = GridFunction::sample(ge, synthetic_family("power-times-exponential", 2,
                                                              {{"power", {c[0] - 1.0, c[1] - 1.0}}, {"rate", {0.0}}}));
    const WeightedNormSpec::R inf[] = {WeightedNormSpec::R::Inf};
    const auto rep = prop1_check_all(f, q, nullptr, c, 1.0, inf).front();
    const auto& line = rep.lines.front();
    out.push_back(upper(5, "r = inf extremal x^(c-I) meets the R_q bound", std::abs(line.lhs / line.rhs - 1.0),
                        "prop1_extremal", "c = (0.7, 0.8)"));
    return out;
  });
}

CheckList check_roundtrip() {
  return guarded(6, "inversion roundtrip", [] {
    CheckList out;
    const auto scene = SceneConfig::parse(demo_scene_text());
    const auto f = scene.sample_f();
    {
      Stopwatch sw;
      const auto R = radon_forward_grid(f, scene.q(), scene.p_grid());
      const auto res = invert_radon(R, scene.q(), scene.inversion, &f);
      out.push_back(upper(6, "invert_radon roundtrip, interior L2", *res.report.interior_l2_error, "roundtrip_radon",
                          "demo scene 256^2"));
      out.push_back(runtime(6, sw.seconds(), "roundtrip_runtime"));
    }
    {
      Stopwatch sw;
      const auto Pi = profit_forward_grid(f, scene.q(), 1.0, scene.p_grid());
      const auto res = invert_profit(Pi, 1.0, scene.q(), scene.inversion, &f);
      out.push_back(upper(6, "invert_profit roundtrip, interior L2", *res.report.interior_l2_error, "roundtrip_profit",
                          "demo scene 256^2, p0 = 1"));
      out.push_back(runtime(6, sw.seconds(), "roundtrip_runtime"));
    }
    return out;
  });
}

CheckList check_analytic_value() {
  return guarded(7, "analytic value", [] {
    CheckList out;
    const auto q = CostExpr::parse(kLinear);
    const auto g = LogGrid::uniform(2, -12.0, 12.0, 512);
    const auto f = GridFunction::sample(g, [](std::span<const double> x) { return std::exp(-x[0] - x[1]); });
    const double exact = 4.0 * std::exp(-2.0);
    const std::vector<double> p{1.0, 1.0};
    for (auto scheme : {RadonScheme::VolumeDifference, RadonScheme::LevelCurve}) {
      const double v = radon_forward(f, q, p, {.scheme = scheme});
      out.push_back(upper(7, std::string("(R_q f)(I) = 4 e^-2, ") + to_string(scheme), std::abs(v / exact - 1.0),
                          "analytic_value"));
    }
    return out;
  });
}

CheckList check_diagnostics() {
  return guarded(8, "diagnostics", [] {
    CheckList out;
    const auto nested = CostExpr::parse(
        "(ces :alpha 1 :C 1 :a (0.5 0.5) (axis 1) (ces :alpha 0.5 :C 1 :a (0.5 0.5) (axis 2) (axis 3)))");
    const std::vector<double> c3{1.0, 1.0, 1.0};
    ScanSettings scan;
    scan.resolution = 32;
    int bad = 0;
    for (auto r : {WeightedNormSpec::R::One, WeightedNormSpec::R::Two, WeightedNormSpec::R::Inf}) {
      for (auto op : {OperatorKind::Radon, OperatorKind::Profit}) {
        if (injectivity_report(op, nested, nullptr, c3, r, scan).verdict != Verdict::InjectiveCertified) ++bad;
      }
    }
    out.push_back(upper(8, "nested CES certified injective (R_q, Pi_q; r = 1, 2, inf)", bad, "kernel_zero_location",
                        "residual = number of non-certified verdicts"));
    out.back().tolerance = 0.0;
    out.back().pass = bad == 0;

    const auto h = two_exponential_kernel();
    const std::size_t res = 256;
    const double radius = 8.0;
    const auto ks = kernel_zero_scan(h, 1.0, radius, res);
    const double spacing = 2.0 * radius / static_cast<double>(res);
    double dist = std::numeric_limits<double>::infinity();
    for (const auto& cand : ks.candidates) dist = std::min(dist, std::abs(cand.xi.front()));
    out.push_back(upper(8, "two-exponential kernel zero at s = 1", dist / spacing, "kernel_zero_location",
                        "distance in lattice spacings, resolution 256"));

    const auto q = CostExpr::parse(kLinear);
    const std::vector<double> c2{0.5, 0.5};
    const auto rep = injectivity_report(OperatorKind::Kernel, q, &h, c2, WeightedNormSpec::R::Inf);
    CheckResult v;
    v.criterion = 8;
    v.identity = "R^h_q verdict, r = inf, two-exponential kernel";
    v.pass = rep.verdict == Verdict::NotInjectiveNumerical;
    v.residual = v.pass ? 0.0 : 1.0;
    v.detail = std::string("verdict ") + to_string(rep.verdict);
    out.push_back(v);
    return out;
  });
}

CheckList run_selftest(SelftestLevel level, std::ostream* log) {
  Stopwatch sw;
  CheckList all;
  auto stage = [&](const char* name, CheckList (*fn)()) {
    Stopwatch s;
    if (log) *log << "running " << name << " ..." << std::flush;
    auto part = fn();
    if (log) *log << " " << fmt("%.1f s", s.seconds()) << "\n";
    all.insert(all.end(), part.begin(), part.end());
  };
  stage("closed form", check_closed_form);
  stage("projection identities", check_projection);
  stage("coarea and factorization", check_coarea_factorization);
  stage("norm estimates", check_norm_estimates);
  stage("analytic value", check_analytic_value);
  if (level == SelftestLevel::Full) {
    stage("inversion roundtrip", check_roundtrip);
    stage("diagnostics", check_diagnostics);
  }
  const bool quick = level == SelftestLevel::Quick;
  CheckResult r = upper(9, quick ? "selftest quick runtime (s)" : "selftest full runtime (s)", sw.seconds(),
                        quick ? "quick_runtime" : "full_runtime");
  all.push_back(r);
  return all;
}

void print_checks(const CheckList& checks, std::ostream& os) {
  char buf[512];
  for (const auto& c : checks) {
    std::snprintf(buf, sizeof buf, "%s  [%d] %-58s residual %-11.3e tol %-9.3g %s\n", c.pass ? "PASS" : "FAIL",
                  c.criterion, c.identity.c_str(), c.residual, c.tolerance, c.detail.c_str());
    os << buf;
  }
}

}  // namespace mellin_radon
