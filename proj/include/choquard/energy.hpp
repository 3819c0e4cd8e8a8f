#pragma once

#include <cmath>

#include "choquard/convolution.hpp"
#include "choquard/spectral.hpp"

namespace choquard {

/// φ = W ∗ |u|².
inline RealField hartree_potential(const ComplexField& u, const Kernel& kern) {
  return free_space_convolve(density(u), kern);
}

/// 𝔻(u) = ∫∫ W(x−y)|u(x)|²|u(y)|² given a precomputed potential.
inline double dd(const ComplexField& u, const RealField& phi) {
  require_same_grid(u.grid(), phi.grid());
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += phi[i] * std::norm(u[i]);
  return s * u.grid().cell_volume();
}

inline double dd(const ComplexField& u, const Kernel& kern) { return dd(u, hartree_potential(u, kern)); }

struct EnergyReport {
  double kinetic = 0.0;  // ‖∇u‖²
  double mass = 0.0;     // ‖u‖²
  double dd = 0.0;       // 𝔻(u)
  double E = 0.0;        // kinetic/2 − dd/4
  double J = 0.0;        // E + a·mass/2
  double a = 0.0;
  double pohozaev_residual = 0.0;  // ½‖∇u‖² + (3a/2)‖u‖² − (5/4)𝔻(u)
};

inline EnergyReport make_report(double kinetic, double mass, double d, double a) {
  EnergyReport r;
  r.kinetic = kinetic;
  r.mass = mass;
  r.dd = d;
  r.a = a;
  r.E = 0.5 * kinetic - 0.25 * d;
  r.J = r.E + 0.5 * a * mass;
  r.pohozaev_residual = 0.5 * kinetic + 1.5 * a * mass - 1.25 * d;
  return r;
}

inline EnergyReport energy_report(const ComplexField& u, double a, const Kernel& kern) {
  return make_report(kinetic(u), l2_sq(u), dd(u, kern), a);
}

struct Residual {
  ComplexField field;
  double norm = 0.0;      // ‖r‖_{L²}
  double relative = 0.0;  // ‖r‖_{L²} / ‖u‖_{H¹}, 0 for u = 0
};

/// r = −Δu + a u − (W ∗ |u|²) u.
inline Residual limiting_residual(const ComplexField& u, double a, const Kernel& kern) {
  const RealField phi = hartree_potential(u, kern);
  Residual res;
  res.field = laplacian(u);
  for (std::size_t i = 0; i < u.size(); ++i) res.field[i] = -res.field[i] + (a - phi[i]) * u[i];
  res.norm = std::sqrt(l2_sq(res.field));
  const double h1 = std::sqrt(l2_sq(u) + kinetic(u));
  res.relative = h1 > 0.0 ? res.norm / h1 : 0.0;
  return res;
}

/// 𝔻(u) / (‖u‖³_{L²} ‖u‖_{H¹}); bounded by a constant for admissible kernels.
inline double hls_ratio(const ComplexField& u, const Kernel& kern) {
  const double m = l2_sq(u);
  require(m > 0.0, "hls_ratio of the zero field is undefined");
  return dd(u, kern) / (std::pow(m, 1.5) * std::sqrt(m + kinetic(u)));
}

// ---------------------------------------------------------------------------
// Magnetic gradient D_j u = −i ∂_j u − A_j u.

using VectorPotential = VectorField<double>;

inline VectorPotential zero_potential(const Grid3& g) { return {RealField(g), RealField(g), RealField(g)}; }

inline VectorField<cplx> magnetic_gradient(const ComplexField& u, const VectorPotential& A) {
  VectorField<cplx> d = gradient(u);
  for (int j = 0; j < 3; ++j) {
    require_same_grid(u.grid(), A[j].grid());
    for (std::size_t i = 0; i < u.size(); ++i) d[j][i] = cplx{0.0, -1.0} * d[j][i] - A[j][i] * u[i];
  }
  return d;
}

/// ∫ |D u|².
inline double magnetic_kinetic(const ComplexField& u, const VectorPotential& A) {
  double s = 0.0;
  for (const auto& c : magnetic_gradient(u, A)) s += l2_sq(c);
  return s;
}

/// ∫|D u|² − ∫|∇|u||². ∇|u| is taken pointwise as Re(ū ∇u)/|u| from the
/// spectral gradient (zero where u vanishes), which makes the inequality
/// hold node by node up to rounding.
inline double diamagnetic_gap(const ComplexField& u, const VectorPotential& A) {
  const VectorField<cplx> grad = gradient(u);
  const double w = u.grid().cell_volume();
  double gap = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double m = std::abs(u[i]);
    for (int j = 0; j < 3; ++j) {
      const cplx dj = cplx{0.0, -1.0} * grad[j][i] - A[j][i] * u[i];
      const double dm = m > 0.0 ? std::real(std::conj(u[i]) * grad[j][i]) / m : 0.0;
      gap += std::norm(dj) - dm * dm;
    }
  }
  return gap * w;
}

}  // namespace choquard
