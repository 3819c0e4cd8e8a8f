#pragma once

#include <cmath>
#include <cstdlib>
#include <vector>

#include "choquard/fft.hpp"
#include "choquard/grid.hpp"

namespace choquard {

/// Forward transform of a field (unnormalized).
inline ComplexField to_spectrum(ComplexField u) {
  fft::cube(u.grid().n()).forward(u.data());
  return u;
}

/// Inverse of to_spectrum, including the 1/n^3 normalization.
inline ComplexField from_spectrum(ComplexField uh) {
  const auto& g = uh.grid();
  fft::cube(g.n()).backward(uh.data());
  uh *= 1.0 / static_cast<double>(g.size());
  return uh;
}

/// Multiplies the spectrum of u by symbol(i, j, l) (FFT-order indices).
template <class Symbol>
ComplexField apply_symbol(const ComplexField& u, Symbol&& symbol) {
  ComplexField uh = to_spectrum(u);
  const long n = u.grid().n();
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      for (long l = 0; l < n; ++l) uh.at(i, j, l) *= symbol(i, j, l);
  return from_spectrum(std::move(uh));
}

/// |k|^2 at FFT index (i, j, l), Nyquist modes included.
inline double k_squared(const Grid3& g, long i, long j, long l) {
  const double kx = g.wavenumber(i), ky = g.wavenumber(j), kz = g.wavenumber(l);
  return kx * kx + ky * ky + kz * kz;
}

/// Partial derivative along axis (0 = x). The Nyquist mode is dropped since
/// an odd derivative of it is not representable on the grid.
inline ComplexField derivative(const ComplexField& u, int axis) {
  const Grid3& g = u.grid();
  return apply_symbol(u, [&](long i, long j, long l) -> cplx {
    const long idx = axis == 0 ? i : (axis == 1 ? j : l);
    if (g.is_nyquist(idx)) return 0.0;
    return {0.0, g.wavenumber(idx)};
  });
}

inline VectorField<cplx> gradient(const ComplexField& u) {
  return {derivative(u, 0), derivative(u, 1), derivative(u, 2)};
}

inline ComplexField laplacian(const ComplexField& u) {
  const Grid3& g = u.grid();
  return apply_symbol(u, [&](long i, long j, long l) -> cplx { return -k_squared(g, i, j, l); });
}

/// (s - Δ)^{-1} u for s > 0.
inline ComplexField screened_inverse(const ComplexField& u, double s) {
  const Grid3& g = u.grid();
  return apply_symbol(u, [&](long i, long j, long l) -> cplx { return 1.0 / (s + k_squared(g, i, j, l)); });
}

// ---------------------------------------------------------------------------
// Quadrature. Rectangle rule with weight h^3, which is spectrally accurate on a
// periodic grid for smooth decaying integrands.

template <class T>
double l2_sq(const Field<T>& u) {
  double s = 0.0;
  for (const T& v : u.values()) s += std::norm(v);
  return s * u.grid().cell_volume();
}

template <class T>
double lp_norm(const Field<T>& u, double p) {
  require(p >= 1.0, "lp_norm requires p >= 1");
  double s = 0.0;
  for (const T& v : u.values()) s += std::pow(std::abs(v), p);
  return std::pow(s * u.grid().cell_volume(), 1.0 / p);
}

template <class T>
double sup_norm(const Field<T>& u) {
  double m = 0.0;
  for (const T& v : u.values()) m = std::max(m, std::abs(v));
  return m;
}

/// ∫ u conj(v).
inline cplx inner(const ComplexField& u, const ComplexField& v) {
  require_same_grid(u.grid(), v.grid());
  cplx s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * std::conj(v[i]);
  return s * u.grid().cell_volume();
}

inline double inner(const RealField& u, const RealField& v) {
  require_same_grid(u.grid(), v.grid());
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s * u.grid().cell_volume();
}

/// ‖∇u‖² evaluated in Fourier space with the same |k|² symbol as laplacian(),
/// so that kinetic(u) = -<u, Δu> holds to rounding.
inline double kinetic(const ComplexField& u) {
  const Grid3& g = u.grid();
  const ComplexField uh = to_spectrum(u);
  const long n = g.n();
  double s = 0.0;
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      for (long l = 0; l < n; ++l) s += k_squared(g, i, j, l) * std::norm(uh.at(i, j, l));
  return s * g.cell_volume() / static_cast<double>(g.size());
}

/// ‖u‖² + Σ_j ‖∂_j u‖², gradient components from derivative().
inline double h1_sq(const ComplexField& u) {
  double s = l2_sq(u);
  for (int d = 0; d < 3; ++d) s += l2_sq(derivative(u, d));
  return s;
}

/// L² norm evaluated from the spectrum (Parseval check).
inline double l2_sq_spectral(const ComplexField& u) {
  const ComplexField uh = to_spectrum(u);
  double s = 0.0;
  for (const cplx& v : uh.values()) s += std::norm(v);
  return s * u.grid().cell_volume() / static_cast<double>(u.grid().size());
}

/// Periodic translation by whole grid cells: out(i + o) = u(i).
template <class T>
Field<T> shift_field(const Field<T>& u, const Index3& offset) {
  const Grid3& g = u.grid();
  const long n = g.n();
  auto wrap = [n](long v) { return ((v % n) + n) % n; };
  Field<T> out(g);
  for (long i = 0; i < n; ++i) {
    const long si = wrap(i + offset[0]);
    for (long j = 0; j < n; ++j) {
      const long sj = wrap(j + offset[1]);
      for (long l = 0; l < n; ++l) out.at(si, sj, wrap(l + offset[2])) = u.at(i, j, l);
    }
  }
  return out;
}

namespace detail {

/// Periodic band-limited cardinal function of an even-n grid with period P.
inline double cardinal(double xi, int n, double period) {
  const double t = pi * xi / period;
  const double st = std::sin(t);
  if (std::abs(st) < 1e-13) return 1.0;
  return std::sin(n * t) / (n * std::tan(t));
}

/// Row i of the 1D interpolation matrix that samples u(λ x_i); rows for
/// points outside [-L, L) are zero.
inline std::vector<double> dilation_matrix(const Grid3& g, double lambda) {
  const long n = g.n();
  const double L = g.half_width();
  const double P = 2.0 * L;
  std::vector<double> m(static_cast<std::size_t>(n * n), 0.0);
  for (long i = 0; i < n; ++i) {
    const double x = lambda * g.coord(i);
    if (x < -L || x >= L) continue;
    for (long j = 0; j < n; ++j) m[static_cast<std::size_t>(i * n + j)] = cardinal(x - g.coord(j), static_cast<int>(n), P);
  }
  return m;
}

}  // namespace detail

/// v(x) = u(λx) by separable trigonometric interpolation. Values whose
/// source point λx falls outside the domain are set to zero.
template <class T>
Field<T> dilate(const Field<T>& u, double lambda) {
  require(lambda > 0.0, "dilation factor must be positive");
  const Grid3& g = u.grid();
  const long n = g.n();
  const std::vector<double> m = detail::dilation_matrix(g, lambda);
  Field<T> a = u;
  Field<T> b(g);
  std::vector<T> line(static_cast<std::size_t>(n));
  for (int axis = 0; axis < 3; ++axis) {
    for (long p = 0; p < n; ++p)
      for (long q = 0; q < n; ++q) {
        auto idx = [&](long t) {
          return axis == 0 ? g.index(t, p, q) : (axis == 1 ? g.index(p, t, q) : g.index(p, q, t));
        };
        for (long t = 0; t < n; ++t) line[static_cast<std::size_t>(t)] = a[idx(t)];
        for (long i = 0; i < n; ++i) {
          const double* row = &m[static_cast<std::size_t>(i * n)];
          T s{};
          for (long t = 0; t < n; ++t) s += row[t] * line[static_cast<std::size_t>(t)];
          b[idx(i)] = s;
        }
      }
    std::swap(a, b);
  }
  return a;
}

/// Fraction of ‖u‖² lying outside the cube [-L', L')^3 with L' = fraction·L.
template <class T>
double mass_outside(const Field<T>& u, double fraction) {
  const Grid3& g = u.grid();
  const double lim = fraction * g.half_width();
  const long n = g.n();
  double out = 0.0, total = 0.0;
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      for (long l = 0; l < n; ++l) {
        const Vec3 x = g.point(i, j, l);
        const double w = std::norm(u.at(i, j, l));
        total += w;
        if (std::abs(x[0]) >= lim || std::abs(x[1]) >= lim || std::abs(x[2]) >= lim) out += w;
      }
  return total > 0.0 ? out / total : 0.0;
}

}  // namespace choquard
