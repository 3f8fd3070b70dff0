#pragma once

#include <complex>

namespace mellin_radon {

using cplx = std::complex<double>;

/// Gamma function on the complex plane (15-term Lanczos, g = 607/128, with
/// reflection for Re z < 1/2). Throws ErrorKind::Pole at non-positive integers.
cplx complex_gamma(cplx z);

/// A branch of log Gamma(z) such that exp(log_gamma(z)) == Gamma(z).
/// Re(log_gamma(z)) is log|Gamma(z)|; the imaginary part is not continuous
/// across the reflection cut and must only be used through exp().
cplx log_gamma(cplx z);

namespace testing {
/// Fault injection: scales the leading Lanczos coefficient by (1 + rel).
/// Zero restores the exact constant. Not thread-safe against concurrent
/// gamma evaluations.
void set_gamma_perturbation(double rel);
}  // namespace testing

}  // namespace mellin_radon
