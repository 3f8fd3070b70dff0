#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mellin_radon/errors.hpp"
#include "mellin_radon/inversion.hpp"
#include "mellin_radon/mellin.hpp"
#include "mellin_radon/scene.hpp"
#include "mellin_radon/transforms.hpp"

using namespace mellin_radon;

namespace {

const CostExpr& linear() {
  static const CostExpr q = CostExpr::parse("(ces :alpha 1 :C 1 :a (0.5 0.5) (axis 1) (axis 2))");
  return q;
}

struct Scene {
  LogGrid g = LogGrid::uniform(2, -10.0, 10.0, 256);
  GridFunction f;
  ForwardBatch batch;
};

// gamma-type density x^2 e^-x per axis, forward data on the reflected p-grid
const Scene& gamma_scene() {
  static const Scene s = [] {
    Scene s;
    s.f = GridFunction::sample(s.g, synthetic_family("gamma-product", 2, {}));
    const auto h = KernelSpec::exponential();
    s.batch = forward_batch(s.f, linear(), reflected_grid(s.g), &h, 1.0);
    return s;
  }();
  return s;
}

// exact slice of R_q f for f = e^(-x1-x2): (Mf)(I - z) K(z) / Gamma(s)
MellinSlice synthesized_slice(const std::vector<double>& c, double dy, std::size_t N) {
  MellinSlice g;
  g.c = c;
  g.dy = {dy, dy};
  g.N = {N, N};
  g.values.resize(N * N);
  std::vector<cplx> z(2);
  for (std::size_t m = 0; m < g.size(); ++m) {
    g.z_at(m, z);
    const cplx s = z[0] + z[1];
    g.values[m] = complex_gamma(1.0 - z[0]) * complex_gamma(1.0 - z[1]) * mellin_expcost_closed(linear(), z) /
                  complex_gamma(s);
  }
  return g;
}

double slice_error(const MellinSlice& out) {
  double err = 0.0;
  std::vector<cplx> w(2);
  for (std::size_t m = 0; m < out.size(); ++m) {
    if (out.mirror(m) >= out.size()) continue;
    out.z_at(m, w);
    const cplx exact = complex_gamma(w[0]) * complex_gamma(w[1]);
    err = std::max(err, std::abs(out.values[m] - exact) / std::abs(exact));
  }
  return err;
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

}  // namespace

TEST_CASE("deconvolve_radon is exact on synthesized slices") {
  const std::vector<double> c{0.4, 0.6};
  const auto g = synthesized_slice(c, 0.25, 32);
  double kmin = 0.0;
  const auto out = deconvolve_radon(g, linear(), {.c = c, .epsilon = 0.0}, &kmin);
  CHECK(out.reflected);
  CHECK(out.c[0] == doctest::Approx(0.6));
  CHECK(out.c[1] == doctest::Approx(0.4));
  CHECK(kmin > 0.0);
  CHECK(slice_error(out) <= 1e-10);

  MellinSlice zero = g;
  std::fill(zero.values.begin(), zero.values.end(), cplx(0.0));
  const auto z = deconvolve_radon(zero, linear(), {.c = c, .epsilon = 0.0});
  CHECK(std::all_of(z.values.begin(), z.values.end(), [](cplx v) { return v == 0.0; }));
}

TEST_CASE("regularization error is monotone in epsilon") {
  const std::vector<double> c{0.5, 0.5};
  const auto g = synthesized_slice(c, 0.1, 64);
  double prev = INFINITY;
  for (int k = 2; k <= 10; ++k) {
    const double e = slice_error(deconvolve_radon(g, linear(), {.c = c, .epsilon = std::pow(10.0, -k)}));
    CAPTURE(k);
    CHECK(e <= prev);
    prev = e;
  }
}

TEST_CASE("division instability without regularization") {
  MellinSlice g;
  g.c = {0.5, 0.5};
  g.dy = {0.005, 0.005};
  g.N = {16, 16};
  g.values.assign(256, cplx(1.0));
  try {
    deconvolve_radon(g, linear(), {.epsilon = 0.0});
    FAIL("no error thrown");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DivisionInstability);
    CHECK(std::string(e.what()).find("xi = (") != std::string::npos);
  }
  CHECK_NOTHROW(deconvolve_radon(g, linear(), {.epsilon = 1e-4}));
}

TEST_CASE("invert_radon round trips") {
  const auto& s = gamma_scene();
  const InversionOptions opts{.c = {1.0, 1.0}};
  const auto res = invert_radon(s.batch.radon, linear(), opts, &s.f);
  REQUIRE(res.report.interior_l2_error);
  CHECK(*res.report.interior_l2_error <= 0.02);
  CHECK(res.report.imag_residue <= 1e-6);
  CHECK(res.report.min_abs_K > 0.0);

  const auto bump = GridFunction::sample(s.g, synthetic_family("lognormal-bump", 2, {{"mu", {0.4, -0.3}}}));
  const auto gb = radon_forward_grid(bump, linear(), reflected_grid(s.g));
  CHECK(*invert_radon(gb, linear(), opts, &bump).report.interior_l2_error <= 0.02);
}

TEST_CASE("invert_profit and invert_kernel round trip") {
  const auto& s = gamma_scene();
  const InversionOptions opts{.c = {1.0, 1.0}};
  const auto rp = invert_profit(s.batch.profit, 1.0, linear(), opts, &s.f);
  CHECK(*rp.report.interior_l2_error <= 0.03);
  const auto rr = invert_radon(s.batch.radon, linear(), opts);
  CHECK(interior_l2_error(rp.estimate, rr.estimate) <= 0.02);

  const auto rk = invert_kernel(s.batch.kernel, linear(), KernelSpec::exponential(), opts, &s.f);
  CHECK(*rk.report.interior_l2_error <= 0.02);
  CHECK(rk.report.flagged_zero_bands.empty());
}

TEST_CASE("zero data gives a zero estimate") {
  const GridFunction zero(reflected_grid(gamma_scene().g));
  auto is_zero = [](const GridFunction& e) {
    return std::all_of(e.values().begin(), e.values().end(), [](double v) { return v == 0.0; });
  };
  CHECK(is_zero(invert_radon(zero, linear()).estimate));
  CHECK(is_zero(invert_profit(zero, 1.0, linear()).estimate));
  CHECK(is_zero(invert_kernel(zero, linear(), KernelSpec::exponential()).estimate));
}

TEST_CASE("invert_radon is linear") {
  const auto& s = gamma_scene();
  const auto g1 = s.batch.radon;
  const auto bump = GridFunction::sample(s.g, synthetic_family("lognormal-bump", 2, {}));
  const auto g2 = radon_forward_grid(bump, linear(), reflected_grid(s.g));
  const double a = 0.7, b = -1.9;
  GridFunction mix(g1.grid());
  for (std::size_t k = 0; k < mix.values().size(); ++k) mix.values()[k] = a * g1.values()[k] + b * g2.values()[k];
  const InversionOptions opts{.c = {1.0, 1.0}, .epsilon = 1e-3};
  const auto e1 = invert_radon(g1, linear(), opts).estimate;
  const auto e2 = invert_radon(g2, linear(), opts).estimate;
  const auto em = invert_radon(mix, linear(), opts).estimate;
  double err = 0.0, peak = 0.0;
  for (std::size_t k = 0; k < em.values().size(); ++k) {
    const double lin = a * e1.values()[k] + b * e2.values()[k];
    err = std::max(err, std::abs(em.values()[k] - lin));
    peak = std::max(peak, std::abs(lin));
  }
  CHECK(err <= 1e-8 * peak);
}

TEST_CASE("kernel with a zero on the inversion line is flagged") {
  const auto& s = gamma_scene();
  const auto h = two_exponential_kernel();
  const auto res = invert_kernel(s.batch.radon, linear(), h, {.c = {0.5, 0.5}});
  const auto& bands = res.report.flagged_zero_bands;
  REQUIRE_FALSE(bands.empty());
  CHECK(std::any_of(bands.begin(), bands.end(), [](auto b) { return b.first <= 0.0 && 0.0 <= b.second; }));
  CHECK(std::any_of(bands.begin(), bands.end(),
                    [](auto b) { return b.first <= 2.0 * M_PI && 2.0 * M_PI <= b.second; }));
}

TEST_CASE("inversion argument errors") {
  const auto& s = gamma_scene();
  CHECK(kind_of([&] { invert_radon(s.batch.radon, linear(), {.epsilon = -1.0}); }) == ErrorKind::Domain);
  CHECK(kind_of([&] { invert_radon(s.batch.radon, linear(), {.c = {0.5, -0.5}}); }) == ErrorKind::Domain);
  CHECK(kind_of([&] { invert_radon(s.batch.radon, linear(), {.c = {0.5}}); }) == ErrorKind::Shape);
  CHECK(kind_of([&] { invert_profit(s.batch.profit, 0.0, linear()); }) == ErrorKind::Domain);
  const auto q3 = CostExpr::parse("(ces :alpha 1 :C 1 :a (0.3 0.3 0.4) (axis 1) (axis 2) (axis 3))");
  CHECK(kind_of([&] { invert_radon(s.batch.radon, q3); }) == ErrorKind::Shape);
}
