#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mellin_radon/cost_model.hpp"
#include "mellin_radon/gamma.hpp"
#include "mellin_radon/grid.hpp"

namespace mellin_radon {

/// Samples of a Mellin transform (Mf)(c + i xi) on the lattice dual to a
/// LogGrid: xi_m = 2 pi m / (N dy) with m in FFT order (0, 1, ..., N/2-1,
/// -N/2, ..., -1) per axis, row-major. Values follow the continuum convention
/// (Mf)(z) = integral of x^(z-I) f(x) dx; no 2 pi factors are stored.
struct MellinSlice {
  std::vector<double> c;
  std::vector<double> dy;
  std::vector<std::size_t> N;
  std::vector<cplx> values;
  bool tapered = false;
  /// Set when the slice was produced by the w = I - z index reversal.
  bool reflected = false;

  std::size_t dim() const noexcept { return N.size(); }
  std::size_t size() const noexcept { return values.size(); }
  /// Signed frequency index of position m on an axis.
  long signed_index(std::size_t axis, std::size_t m) const noexcept;
  double xi(std::size_t axis, std::size_t m) const noexcept;
  /// z = c + i xi at a flat offset.
  void z_at(std::size_t flat, std::span<cplx> z) const;
  /// Flat offset of the lattice point whose frequency is the negation of the
  /// one at `flat`, or size() when that point is a Nyquist bin on some axis.
  std::size_t mirror(std::size_t flat) const;
  bool is_nyquist(std::size_t flat) const;

  void write_csv(std::ostream& os) const;
  static MellinSlice read_csv(std::istream& is);
  void save(const std::string& path) const;
  static MellinSlice load(const std::string& path);
};

/// Samples of (E_c f)(y) = e^(c.y) f(e^y).
GridFunction ec_transform(const GridFunction& f, std::span<const double> c);

/// Cosine window over the outer 10% of each axis (product over axes).
std::vector<double> cosine_taper(const LogGrid& g);

/// Discrete Mellin transform on Re z = c by FFT of E_c f with the quadrature
/// weight and the y0 phase applied.
MellinSlice mellin_forward(const GridFunction& f, std::span<const double> c, bool taper = false);

/// Inverse of mellin_forward onto `target` (same N and dy as the slice).
/// The real part is returned; `imag_residue` receives max|Im| / max|Re|.
GridFunction mellin_inverse(const MellinSlice& slice, const LogGrid& target,
                            double* imag_residue = nullptr);

/// Tensor trapezoid box in log-coordinates.
struct QuadratureBox {
  std::vector<double> ymin;
  std::vector<double> ymax;
  std::vector<std::size_t> nodes;
  /// Divergence test: the box is widened by this fraction on each side at the
  /// same spacing and the two results compared.
  double extension = 0.25;
  /// Allowed change under widening, relative to the integral of |integrand|.
  double convergence_tol = 1e-8;

  static QuadratureBox uniform(std::size_t n, double ymin, double ymax, std::size_t nodes);
};

/// f(e^w) for complex log-coordinates w.
using ComplexIntegrand = std::function<cplx(std::span<const cplx> w)>;
/// Maps a real point y to the contour point w(y) and returns det(dw/dy).
using ContourMap = std::function<cplx(std::span<const double> y, std::span<cplx> w)>;

/// integral of x^(z-I) f(x) dx by direct quadrature over the box (test oracle).
/// Throws NonConvergence if widening the box changes the value.
cplx mellin_quadrature(const CostFunction& f, std::span<const cplx> z, const QuadratureBox& box);

/// Same integral along the deformed contour w(y), for analytic integrands
/// whose continuation decays on the contour.
cplx mellin_quadrature(const ComplexIntegrand& f, std::span<const cplx> z, const QuadratureBox& box,
                       const ContourMap& contour);

/// w = y + i theta with constant theta.
ContourMap rotation_contour(std::vector<double> theta);

/// Contour for e^(-q) with q a flat CES node: w_j = y_j + i (phi(y) + delta_j),
/// where the offsets delta_j open the spread between axes whose frequencies
/// have opposite signs and phi keeps arg q(e^w) equal to `gamma`
/// (sign taken from the total frequency). `margin` keeps alpha * spread below pi.
ContourMap ces_contour(const CostExpr& q, std::span<const double> xi, double gamma = 1.0,
                       double margin = 0.8);

/// Closed form of (M e^(-q))(z) for a CES tree, Re z > 0.
cplx mellin_expcost_closed(const CostExpr& q, std::span<const cplx> z);
/// Its logarithm (any branch); finite for every Re z > 0.
cplx log_mellin_expcost_closed(const CostExpr& q, std::span<const cplx> z);

}  // namespace mellin_radon
