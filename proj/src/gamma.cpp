#include "mellin_radon/gamma.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <numbers>

#include "mellin_radon/errors.hpp"

namespace mellin_radon {

namespace {

constexpr double kLanczosG = 607.0 / 128.0;

// Godfrey's coefficients for g = 607/128, n = 15.
constexpr std::array<double, 15> kLanczos = {
    0.99999999999999709182,     57.156235665862923517,
    -59.597960355475491248,     14.136097974741747174,
    -0.49191381609762019978,    .33994649984811888699e-4,
    .46523628927048575665e-4,   -.98374475304879564677e-4,
    .15808870322491248884e-3,   -.21026444172410488319e-3,
    .21743961811521264320e-3,   -.16431810653676389022e-3,
    .84418223983852743293e-4,   -.26190838401581408670e-4,
    .36899182659531622704e-5};

std::atomic<double> g_perturbation{0.0};

void check_pole(cplx z) {
  if (z.imag() == 0.0 && z.real() <= 0.0 && z.real() == std::round(z.real())) {
    fail(ErrorKind::Pole, "Gamma has a pole at z = " + std::to_string(z.real()));
  }
}

// log Gamma for Re z >= 1/2.
cplx log_gamma_right(cplx z) {
  z -= 1.0;
  cplx series = kLanczos[0] * (1.0 + g_perturbation.load(std::memory_order_relaxed));
  for (std::size_t k = 1; k < kLanczos.size(); ++k) {
    series += kLanczos[k] / (z + static_cast<double>(k));
  }
  const cplx t = z + kLanczosG + 0.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t +
         std::log(series);
}

// log sin(pi z), safe for large |Im z|.
cplx log_sin_pi(cplx z) {
  const double pi = std::numbers::pi;
  const cplx i(0.0, 1.0);
  if (z.imag() < 0.0) return std::conj(log_sin_pi(std::conj(z)));
  // sin(pi z) = e^{-i pi z} (e^{2 i pi z} - 1) / (2i); |e^{2 i pi z}| <= 1 here.
  return -i * pi * z + std::log((std::exp(2.0 * i * pi * z) - 1.0) / (2.0 * i));
}

}  // namespace

cplx log_gamma(cplx z) {
  check_pole(z);
  if (z.real() >= 0.5) return log_gamma_right(z);
  return std::log(std::numbers::pi) - log_sin_pi(z) - log_gamma_right(1.0 - z);
}

cplx complex_gamma(cplx z) {
  check_pole(z);
  if (z.imag() == 0.0 && z.real() > 0.0 && z.real() < 171.0 &&
      g_perturbation.load(std::memory_order_relaxed) == 0.0) {
    // Real axis: tgamma is correctly rounded to within a few ulp.
    return {std::tgamma(z.real()), 0.0};
  }
  return std::exp(log_gamma(z));
}

namespace testing {
void set_gamma_perturbation(double rel) { g_perturbation.store(rel); }
}  // namespace testing

}  // namespace mellin_radon
