#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "mellin_radon/errors.hpp"
#include "mellin_radon/kernel.hpp"
#include "mellin_radon/mellin.hpp"
#include "mellin_radon/scene.hpp"
#include "mellin_radon/transforms.hpp"

using namespace mellin_radon;
using std::numbers::pi;

namespace {

double rel(cplx a, cplx b) { return std::abs(a - b) / std::abs(b); }

GridFunction sample(const LogGrid& g, const std::function<double(std::span<const double>)>& f) {
  return GridFunction::sample(g, f);
}

}  // namespace

TEST_CASE("ec_transform examples") {
  const auto g = LogGrid::uniform(2, -3.0, 3.0, 16);
  const auto one = sample(g, [](auto) { return 1.0; });
  const std::vector<double> zero{0.0, 0.0}, c{0.7, 1.3};
  const auto e1 = ec_transform(one, zero);
  for (double v : e1.values()) CHECK(v == 1.0);
  const auto pw = sample(g, [&](std::span<const double> x) { return std::pow(x[0], -c[0]) * std::pow(x[1], -c[1]); });
  const auto ep = ec_transform(pw, c);
  for (double v : ep.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-13));

  LogGrid g1;
  g1.y0 = {-4.0};
  g1.dy = {0.5};
  g1.N = {16};
  const auto e = sample(g1, [](std::span<const double> x) { return std::exp(-x[0]); });
  const std::vector<double> c1{1.0};
  CHECK(ec_transform(e, c1)[8] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
}

TEST_CASE("mellin_forward examples") {
  const auto g1 = LogGrid::uniform(1, -30.0, 5.0, 2048);
  const std::vector<double> c1{1.0};
  const auto s1 = mellin_forward(sample(g1, [](std::span<const double> x) { return std::exp(-x[0]); }), c1);
  CHECK(std::abs(s1.values[0] - 1.0) <= 1e-8);

  const auto g2 = LogGrid::uniform(2, -30.0, 5.0, 512);
  const std::vector<double> c2{1.0, 1.0};
  const auto s2 = mellin_forward(sample(g2, [](std::span<const double> x) { return std::exp(-x[0] - x[1]); }), c2);
  CHECK(std::abs(s2.values[0] - 1.0) <= 1e-8);

  const auto z = mellin_forward(GridFunction(g2), c2);
  for (auto v : z.values) CHECK(v == cplx(0.0));

  const std::vector<double> bad{1.0, 0.0};
  CHECK_THROWS_AS(mellin_forward(GridFunction(g2), bad), Error);
}

TEST_CASE("mellin_forward agrees with quadrature on x^b e^{-|x|_1}") {
  const std::vector<double> b{0.5, 1.5}, c{0.8, 0.6};
  const auto g = LogGrid::uniform(2, -40.0, 5.0, 512);
  auto fx = [&](std::span<const double> x) {
    return std::pow(x[0], b[0]) * std::pow(x[1], b[1]) * std::exp(-x[0] - x[1]);
  };
  const auto s = mellin_forward(sample(g, fx), c);
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> M(-20, 20);
  std::vector<cplx> z(2);
  for (int k = 0; k < 20; ++k) {
    const std::size_t flat = static_cast<std::size_t>((M(rng) + 512) % 512) * 512 + static_cast<std::size_t>((M(rng) + 512) % 512);
    s.z_at(flat, z);
    // separable: Gamma(z_i + b_i)
    const cplx exact = complex_gamma(z[0] + b[0]) * complex_gamma(z[1] + b[1]);
    CHECK(rel(s.values[flat], exact) <= 1e-4);
  }
}

TEST_CASE("mellin_inverse round trip and examples") {
  const auto g = LogGrid::uniform(1, -12.0, 12.0, 4096);
  const std::vector<double> c{1.5};
  const auto f = sample(g, [](std::span<const double> x) { return x[0] * std::exp(-x[0]); });
  const auto back = mellin_inverse(mellin_forward(f, c), g);
  // relative to the peak: pointwise ratios are meaningless where f underflows
  double worst = 0.0, peak = 0.0;
  for (std::size_t k = 820; k < 4096 - 820; ++k) {
    worst = std::max(worst, std::abs(back[k] - f[k]));
    peak = std::max(peak, std::abs(f[k]));
  }
  CHECK(worst / peak <= 1e-6);

  MellinSlice zero{.c = c, .dy = g.dy, .N = g.N, .values = std::vector<cplx>(4096)};
  const auto z0 = mellin_inverse(zero, g);
  for (double v : z0.values()) CHECK(v == 0.0);

  // constant slice: impulse of height 1/dy at y = 0
  LogGrid h;
  h.y0 = {-4.0};
  h.dy = {0.5};
  h.N = {16};
  MellinSlice one{.c = c, .dy = h.dy, .N = h.N, .values = std::vector<cplx>(16, cplx(1.0))};
  const auto imp = mellin_inverse(one, h);
  for (std::size_t k = 0; k < 16; ++k) CHECK(imp[k] == doctest::Approx(k == 8 ? 2.0 : 0.0).epsilon(1e-12).scale(1.0));
}

TEST_CASE("mellin_quadrature examples") {
  const std::vector<cplx> z1{2.0}, z2{1.0, 2.0};
  auto box1 = QuadratureBox::uniform(1, -40.0, 5.0, 4001);
  const CostFunction e1 = [](std::span<const double> x) { return std::exp(-x[0]); };
  CHECK(std::abs(mellin_quadrature(e1, z1, box1) - 1.0) <= 1e-6);
  auto box2 = QuadratureBox::uniform(2, -40.0, 5.0, 801);
  const CostFunction e2 = [](std::span<const double> x) { return std::exp(-x[0] - x[1]); };
  CHECK(std::abs(mellin_quadrature(e2, z2, box2) - 1.0) <= 1e-6);
  const CostFunction zero = [](auto) { return 0.0; };
  CHECK(mellin_quadrature(zero, z2, box2) == cplx(0.0));
  // x^(z-1) e^-x with Re z = 0.5 on a box cut at y = -3 still carries mass
  const CostFunction flat = [](std::span<const double> x) { return 1.0 / (1.0 + x[0]); };
  auto short_box = QuadratureBox::uniform(1, -3.0, 3.0, 200);
  const std::vector<cplx> zh{0.5};
  CHECK_THROWS_AS(mellin_quadrature(flat, zh, short_box), Error);
}

TEST_CASE("complex_gamma") {
  CHECK(std::abs(complex_gamma(1.0) - 1.0) <= 1e-15);
  CHECK(std::abs(complex_gamma(0.5) - std::sqrt(pi)) <= 1e-14);
  for (double x : {0.1, 0.7, 3.3, 12.5, 40.0, -2.5, -7.3}) {
    CHECK(std::abs(complex_gamma(x).real() / std::tgamma(x) - 1.0) <= 1e-12);
  }
  // |Gamma(1/2 + iy)|^2 = pi / cosh(pi y), |Gamma(1 + iy)|^2 = pi y / sinh(pi y)
  for (double y : {0.3, 2.0, 7.5, 20.0, 60.0}) {
    CHECK(std::norm(complex_gamma(cplx(0.5, y))) / (pi / std::cosh(pi * y)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::norm(complex_gamma(cplx(1.0, y))) / (pi * y / std::sinh(pi * y)) == doctest::Approx(1.0).epsilon(1e-12));
  }
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> re(-10.0, 49.0), im(-100.0, 100.0);
  for (int k = 0; k < 100; ++k) {
    const cplx z(re(rng), im(rng));
    const cplx g1 = complex_gamma(z + 1.0);
    CHECK(std::abs(g1 - z * complex_gamma(z)) <= 1e-12 * std::abs(g1));
    CHECK(std::abs(std::exp(log_gamma(z)) / complex_gamma(z) - 1.0) <= 1e-10);
  }
  for (double p : {0.0, -1.0, -4.0}) {
    try {
      complex_gamma(p);
      FAIL("expected a pole error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Pole);
    }
  }
}

TEST_CASE("mellin_expcost_closed") {
  const auto lin = CostExpr::parse("(ces :alpha 1 :C 1 :a (0.5 0.5) (axis 1) (axis 2))");
  const std::vector<cplx> z11{1.0, 1.0};
  CHECK(std::abs(mellin_expcost_closed(lin, z11) - 4.0) <= 1e-13);

  const std::vector<cplx> z{{1.0, 5.0}, {1.0, -5.0}};
  auto box = QuadratureBox::uniform(2, -30.0, 10.0, 320);
  box.extension = 0.1;
  const std::vector<double> xi{5.0, -5.0};
  const cplx quad = mellin_quadrature(
      [&](std::span<const cplx> w) { return std::exp(-std::exp(lin.log_value_complex(w))); }, z, box,
      ces_contour(lin, xi));
  CHECK(rel(quad, mellin_expcost_closed(lin, z)) <= 1e-5);

  const auto nested = CostExpr::parse(
      "(ces :alpha 1 :C 1 :a (0.5 0.5) (axis 1) (ces :alpha 0.5 :C 1 :a (0.5 0.5) (axis 2) (axis 3)))");
  const std::vector<cplx> z3{1.0, 1.0, 1.0};
  auto box3 = QuadratureBox::uniform(3, -20.0, 8.0, 64);
  box3.extension = 0.1;
  const CostFunction e3 = [&](std::span<const double> x) { return std::exp(-nested.value(x)); };
  CHECK(rel(mellin_quadrature(e3, z3, box3), mellin_expcost_closed(nested, z3)) <= 1e-3);

  // never vanishes: Gamma products
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> re(0.05, 4.0), im(-30.0, 30.0);
  for (int k = 0; k < 200; ++k) {
    const std::vector<cplx> w{{re(rng), im(rng)}, {re(rng), im(rng)}, {re(rng), im(rng)}};
    CHECK(std::isfinite(log_mellin_expcost_closed(nested, w).real()));
  }
}

TEST_CASE("kernel_mellin") {
  CHECK(std::abs(kernel_mellin(KernelSpec::profit(1.0), 1.0) - 0.5) <= 1e-15);
  CHECK(std::abs(kernel_mellin(KernelSpec::profit(2.0), cplx(1.5, 2.0)) -
                 std::pow(2.0, cplx(2.5, 2.0)) / (cplx(1.5, 2.0) * cplx(2.5, 2.0))) <= 1e-13);
  CHECK(std::abs(kernel_mellin(KernelSpec::exponential(), 2.0) - 1.0) <= 1e-14);
  const auto h = two_exponential_kernel();
  CHECK(std::abs(kernel_mellin(h, 1.0)) <= 1e-6);
  for (cplx s : {cplx(2.0, 0.0), cplx(1.5, 3.0), cplx(0.7, -1.0)}) {
    const cplx exact = complex_gamma(s) * (1.0 - std::exp(1.0 - s));
    CHECK(rel(kernel_mellin(h, s), exact) <= 1e-6);
  }
  CHECK_THROWS_AS(KernelSpec::profit(0.0), Error);
}

TEST_CASE("Parseval pairing and isometry of E_c") {
  const auto g = LogGrid::uniform(2, -6.0, 4.0, 64);
  const auto u = sample(g, [](std::span<const double> x) { return std::exp(-x[0]) * x[1] / (1.0 + x[1] * x[1]); });
  const auto v = sample(g, [](std::span<const double> x) { return std::exp(-x[1]) * std::sqrt(x[0]); });
  const std::vector<double> c{0.3, 0.8}, cd{0.7, 0.2}, I{1.0, 1.0};
  const auto eu = ec_transform(u, c), ev = ec_transform(v, cd), uv = ec_transform(u, I);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    lhs += uv[k] * v[k];
    rhs += eu[k] * ev[k];
  }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));

  for (auto r : {WeightedNormSpec::R::One, WeightedNormSpec::R::Two, WeightedNormSpec::R::Inf}) {
    double acc = 0.0;
    for (double e : eu.values()) {
      if (r == WeightedNormSpec::R::One) acc += std::abs(e);
      if (r == WeightedNormSpec::R::Two) acc += e * e;
      if (r == WeightedNormSpec::R::Inf) acc = std::max(acc, std::abs(e));
    }
    const double cell = g.cell_volume();
    const double plain = r == WeightedNormSpec::R::One ? acc * cell : r == WeightedNormSpec::R::Two ? std::sqrt(acc * cell) : acc;
    CHECK(weighted_norm(u, WeightedNormSpec{r, c}) == doctest::Approx(plain).epsilon(1e-10));
  }
}

TEST_CASE("GridFunction and MellinSlice CSV round trip") {
  const auto g = LogGrid::uniform(2, -2.0, 2.0, 8);
  auto f = sample(g, [](std::span<const double> x) { return std::log(x[0]) + x[1]; });
  f.values()[3] = 4.9e-320;
  std::stringstream ss;
  f.write_csv(ss);
  const auto back = GridFunction::read_csv(ss);
  CHECK(back.grid() == g);
  for (std::size_t k = 0; k < g.size(); ++k) CHECK(back[k] == f[k]);

  const std::vector<double> c{0.5, 0.5};
  const auto s = mellin_forward(f, c);
  std::stringstream ms;
  s.write_csv(ms);
  const auto sb = MellinSlice::read_csv(ms);
  CHECK(sb.c == s.c);
  for (std::size_t k = 0; k < s.size(); ++k) CHECK(sb.values[k] == s.values[k]);

  std::stringstream bad("# dim 1\n# axis 1: 0 0.5 8\n1\n2\nthree\n");
  CHECK_THROWS_AS(GridFunction::read_csv(bad), ParseError);
}
