#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <cstdlib>
#include <random>

#include "mellin_radon/errors.hpp"
#include "mellin_radon/mellin.hpp"
#include "mellin_radon/scene.hpp"
#include "mellin_radon/transforms.hpp"

using namespace mellin_radon;

namespace {

const CostExpr& linear() {
  static const CostExpr q = CostExpr::parse("(ces :alpha 1 :C 1 :a (0.5 0.5) (axis 1) (axis 2))");
  return q;
}

GridFunction expo(const LogGrid& g) {
  return GridFunction::sample(g, [](std::span<const double> x) { return std::exp(-x[0] - x[1]); });
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::Argument;
}

const std::vector<double> kOne{1.0, 1.0};

}  // namespace

TEST_CASE("radon_forward: analytic line integral, all schemes") {
  const auto f = expo(LogGrid::uniform(2, -12.0, 12.0, 512));
  const double exact = 4.0 * std::exp(-2.0);
  for (auto s : {RadonScheme::VolumeDifference, RadonScheme::LevelCurve, RadonScheme::RayChart}) {
    CAPTURE(to_string(s));
    CHECK(std::abs(radon_forward(f, linear(), kOne, {.scheme = s}) / exact - 1.0) <= 1e-3);
  }
  const GridFunction zero(f.grid());
  CHECK(radon_forward(zero, linear(), kOne) == 0.0);
}

TEST_CASE("radon_forward of x^(c-I) against the closed form") {
  // c = I: f = 1 and (R_q f)(I) = (M e^-q)(I) / Gamma(2) = 4
  const auto g = LogGrid::uniform(2, -20.0, 3.0, 256);
  const auto one = GridFunction::sample(g, [](auto) { return 1.0; });
  const std::vector<cplx> z{1.0, 1.0};
  const double closed = mellin_expcost_closed(linear(), z).real();
  for (auto s : {RadonScheme::LevelCurve, RadonScheme::RayChart}) {
    CHECK(radon_forward(one, linear(), kOne, {.scheme = s}) == doctest::Approx(closed).epsilon(1e-3));
  }
}

TEST_CASE("scaling covariance for power functions") {
  const std::vector<double> c{0.7, 0.8};
  const auto q = CostExpr::parse("(ces :alpha 0.5 :C 1 :a (0.4 0.6) (axis 1) (axis 2))");
  const auto g = LogGrid::uniform(2, -30.0, 30.0, 256);
  const auto f = GridFunction::sample(g, [&](std::span<const double> x) {
    return std::pow(x[0], c[0] - 1.0) * std::pow(x[1], c[1] - 1.0);
  });
  const double r1 = radon_forward(f, q, kOne, {.scheme = RadonScheme::RayChart});
  for (auto p : std::vector<std::vector<double>>{{0.5, 2.0}, {3.0, 0.3}, {1.7, 1.2}}) {
    const double rp = radon_forward(f, q, p, {.scheme = RadonScheme::RayChart});
    CHECK(rp == doctest::Approx(std::pow(p[0], -c[0]) * std::pow(p[1], -c[1]) * r1).epsilon(1e-3));
  }
}

TEST_CASE("forward schemes agree") {
  const auto g = LogGrid::uniform(2, -10.0, 10.0, 512);
  const auto f = GridFunction::sample(g, synthetic_family("gamma-product", 2, {{"k", {1.5, 2.5}}}));
  const auto q = CostExpr::parse("(ces :alpha 0.6 :C 1.2 :a (0.3 0.7) (axis 1) (axis 2))");
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> U(-1.5, 1.5);
  for (int k = 0; k < 8; ++k) {
    const std::vector<double> p{std::exp(U(rng)), std::exp(U(rng))};
    const double a = radon_forward(f, q, p, {.scheme = RadonScheme::VolumeDifference});
    const double b = radon_forward(f, q, p, {.scheme = RadonScheme::LevelCurve});
    const double r = radon_forward(f, q, p, {.scheme = RadonScheme::RayChart});
    CHECK(std::abs(a / b - 1.0) <= 1e-3);
    CHECK(std::abs(r / b - 1.0) <= 1e-3);
  }
}

TEST_CASE("radon_forward errors") {
  const auto f = expo(LogGrid::uniform(2, -4.0, 4.0, 64));
  // level set x1 + x2 = 2e6 leaves the box where f still matters
  const auto flat = GridFunction::sample(f.grid(), [](auto) { return 1.0; });
  const std::vector<double> tiny{1e-6, 1e-6};
  CHECK(kind_of([&] { radon_forward(flat, linear(), tiny); }) == ErrorKind::Coverage);
  CHECK(kind_of([&] { radon_forward(f, linear(), kOne, {.scheme = RadonScheme::VolumeDifference, .delta = 1e-9}); }) ==
        ErrorKind::Resolution);
  const std::vector<double> neg{1.0, -1.0};
  CHECK(kind_of([&] { radon_forward(f, linear(), neg); }) == ErrorKind::Domain);
  const std::vector<double> three{1.0, 1.0, 1.0};
  CHECK(kind_of([&] { radon_forward(f, linear(), three); }) == ErrorKind::Shape);
}

TEST_CASE("rhq_forward") {
  const auto f = expo(LogGrid::uniform(2, -12.0, 8.0, 256));
  const auto h = KernelSpec::exponential();
  const double exact = 4.0 / 9.0;
  const double direct = rhq_forward(f, linear(), h, kOne, {.method = RhqMethod::Direct});
  const double coarea = rhq_forward(f, linear(), h, kOne, {.method = RhqMethod::Coarea});
  CHECK(direct == doctest::Approx(exact).epsilon(1e-3));
  CHECK(coarea == doctest::Approx(direct).epsilon(1e-3));
  const GridFunction zero(f.grid());
  CHECK(rhq_forward(zero, linear(), h, kOne) == 0.0);
  const auto prof = KernelSpec::profit(1.3);
  CHECK(rhq_forward(f, linear(), prof, kOne, {.method = RhqMethod::Coarea}) ==
        doctest::Approx(profit_forward(f, linear(), 1.3, kOne)).epsilon(1e-3));
}

TEST_CASE("profit_forward") {
  const auto g = LogGrid::uniform(2, -12.0, 8.0, 256);
  const auto f = expo(g);
  const double exact = 2.0 * std::exp(-2.0);
  const double pi = profit_forward(f, linear(), 1.0, kOne);
  CHECK(pi == doctest::Approx(exact).epsilon(1e-3));
  CHECK(rhq_forward(f, linear(), KernelSpec::profit(1.0), kOne, {.method = RhqMethod::Coarea}) ==
        doctest::Approx(exact).epsilon(1e-3));

  // support in [1, 2]^2 where q_p >= 1 > p0
  const auto g2 = LogGrid::uniform(2, -2.0, 2.0, 128);
  const auto box = GridFunction::sample(g2, [](std::span<const double> x) {
    return x[0] >= 1.0 && x[0] <= 2.0 && x[1] >= 1.0 && x[1] <= 2.0 ? 1.0 : 0.0;
  });
  CHECK(profit_forward(box, linear(), 0.9, kOne) == 0.0);

  // nondecreasing and convex in p0
  std::vector<double> vals;
  for (int k = 0; k <= 20; ++k) vals.push_back(profit_forward(f, linear(), 0.2 + 0.15 * k, kOne));
  for (std::size_t k = 1; k < vals.size(); ++k) CHECK(vals[k] >= vals[k - 1]);
  for (std::size_t k = 1; k + 1 < vals.size(); ++k) CHECK(vals[k + 1] - 2.0 * vals[k] + vals[k - 1] >= -1e-12);

  const double step = 1e-2;
  const double fd = (profit_forward(f, linear(), 1.0 + step, kOne) - 2.0 * pi +
                     profit_forward(f, linear(), 1.0 - step, kOne)) / (step * step);
  CHECK(std::abs(fd / radon_forward(f, linear(), kOne) - 1.0) <= 1e-2);
  CHECK(kind_of([&] { profit_forward(f, linear(), 0.0, kOne); }) == ErrorKind::Domain);
}

TEST_CASE("forward_batch matches pointwise evaluation") {
  const auto g = LogGrid::uniform(2, -10.0, 10.0, 128);
  const auto f = GridFunction::sample(g, synthetic_family("lognormal-bump", 2, {{"mu", {0.3, -0.2}}}));
  const auto q = CostExpr::parse("(ces :alpha 0.5 :C 1 :a (0.5 0.5) (axis 1) (axis 2))");
  const auto h = KernelSpec::exponential();
  const auto pg = reflected_grid(g);
  const auto b = forward_batch(f, q, pg, &h, 1.3);
  std::vector<std::size_t> idx(2);
  std::vector<double> p(2);
  for (std::size_t k : {std::size_t{64 * 128 + 64}, std::size_t{50 * 128 + 70}, std::size_t{70 * 128 + 55}}) {
    pg.unravel(k, idx);
    for (int i = 0; i < 2; ++i) p[i] = std::exp(pg.y(i, idx[i]));
    CAPTURE(k);
    CHECK(b.radon[k] == doctest::Approx(radon_forward(f, q, p, {.scheme = RadonScheme::LevelCurve})).epsilon(1e-3));
    CHECK(b.profit[k] == doctest::Approx(profit_forward(f, q, 1.3, p)).epsilon(1e-3));
    CHECK(b.kernel[k] == doctest::Approx(rhq_forward(f, q, h, p)).epsilon(1e-3));
  }
}

TEST_CASE("grid transforms do not depend on the thread count") {
  const auto g = LogGrid::uniform(2, -8.0, 8.0, 64);
  const auto f = GridFunction::sample(g, synthetic_family("gamma-product", 2, {}));
  ::setenv("MELLIN_RADON_THREADS", "1", 1);
  const auto a = radon_forward_grid(f, linear(), reflected_grid(g));
  ::setenv("MELLIN_RADON_THREADS", "3", 1);
  const auto b = radon_forward_grid(f, linear(), reflected_grid(g));
  ::unsetenv("MELLIN_RADON_THREADS");
  CHECK(std::ranges::equal(a.values(), b.values()));
}

TEST_CASE("weighted_norm examples") {
  const auto g = LogGrid::uniform(1, -30.0, 5.0, 2048);
  const auto e = GridFunction::sample(g, [](std::span<const double> x) { return std::exp(-x[0]); });
  const std::vector<double> c{1.0};
  CHECK(weighted_norm(e, {WeightedNormSpec::R::One, c}) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(weighted_norm(GridFunction(g), {WeightedNormSpec::R::Two, c}) == 0.0);
  const auto inv = GridFunction::sample(g, [](std::span<const double> x) { return 1.0 / x[0]; });
  CHECK(weighted_norm(inv, {WeightedNormSpec::R::Inf, c}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(WeightedNormSpec::parse_r("inf") == WeightedNormSpec::R::Inf);
  CHECK(WeightedNormSpec{WeightedNormSpec::R::One, {0.3, 0.4}}.alpha() == doctest::Approx(0.7));
}

TEST_CASE("prop1_check") {
  const auto g = LogGrid::uniform(2, -10.0, 10.0, 128);
  const auto f = expo(g);
  const auto h = KernelSpec::exponential();
  const auto rep = prop1_check(f, linear(), &h, WeightedNormSpec::R::One, kOne);
  REQUIRE(rep.lines.size() == 3);
  for (const auto& l : rep.lines) {
    CAPTURE(l.name);
    CHECK(l.lhs > 0.0);
    CHECK(l.slack() > 0.0);
  }
  const auto z = prop1_check(GridFunction(g), linear(), &h, WeightedNormSpec::R::Two, kOne);
  for (const auto& l : z.lines) {
    CHECK(l.lhs == 0.0);
    CHECK(l.rhs == 0.0);
    CHECK(l.holds(1e-3));
  }
  for (auto r : {WeightedNormSpec::R::One, WeightedNormSpec::R::Two, WeightedNormSpec::R::Inf}) {
    const std::vector<double> c{0.6, 0.5};
    CHECK(prop1_check(f, linear(), &h, r, c, 1.4).holds(1e-3));
  }
  // the extremal function attains the r = inf bound
  const std::vector<double> c{0.7, 0.8};
  const auto ge = LogGrid::uniform(2, -12.0, 12.0, 128);
  const auto fe = GridFunction::sample(ge, [&](std::span<const double> x) {
    return std::pow(x[0], c[0] - 1.0) * std::pow(x[1], c[1] - 1.0);
  });
  const auto ex = prop1_check(fe, linear(), nullptr, WeightedNormSpec::R::Inf, c);
  CHECK(ex.lines.front().lhs == doctest::Approx(ex.lines.front().rhs).epsilon(1e-3));
}

TEST_CASE("coarea_check") {
  const auto g = LogGrid::uniform(2, -10.0, 10.0, 256);
  CHECK(coarea_check(expo(g), linear(), kOne) <= 1e-3);
  CHECK(coarea_check(GridFunction(g), linear(), kOne) == 0.0);
  const auto bump = GridFunction::sample(g, synthetic_family("lognormal-bump", 2, {{"sigma", {0.3}}}));
  const auto q = CostExpr::parse("(ces :alpha 0.3 :C 1 :a (0.5 0.5) (axis 1) (axis 2))");
  const std::vector<double> p{0.6, 1.9};
  CHECK(coarea_check(bump, q, p) <= 1e-3);
  CHECK(kind_of([&] { coarea_check(expo(g), linear(), kOne, {.t_min = 1.0, .t_max = 2.0}); }) == ErrorKind::Coverage);
}

TEST_CASE("factorization_check") {
  const std::vector<double> x1{1.0, 1.0}, x2{2.0, 2.0};
  const std::vector<cplx> z{1.0, 1.0}, zc{{0.6, 1.3}, {0.7, -0.4}};
  CHECK(factorization_check(linear(), KernelSpec::exponential(), x1, z) <= 1e-3);
  CHECK(factorization_check(linear(), KernelSpec::profit(1.0), x1, z) <= 1e-3);
  CHECK(factorization_check(linear(), KernelSpec::profit(1.0), x2, z) <= 1e-3);
  const auto q = CostExpr::parse("(ces :alpha 0.5 :C 1 :a (0.4 0.6) (axis 1) (axis 2))");
  CHECK(factorization_check(q, KernelSpec::exponential(), x2, zc) <= 1e-3);
}
