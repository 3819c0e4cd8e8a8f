#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "choquard/energy.hpp"

namespace choquard {

/// Initial profile for the flow: a Gaussian e^{−|x|²/(2w²)} or a given field.
struct SeedProfile {
  double width = 2.0;
  std::optional<ComplexField> field;
};

struct SolverParams {
  double dt = 1.0;  // semi-implicit gradient-flow step
  int max_iter = 5000;
  double tol = 1e-12;  // relative energy decrease per step that counts as converged
  SeedProfile seed;
};

struct DecayFit {
  double C = 0.0;
  double sigma = 0.0;
  double elasticity = 0.0;  // d log|slope| / d log r of log U at mid-shell
  double envelope_ratio = 0.0;  // max over the shell of U / (C e^{−σr})
  std::size_t samples = 0;
  bool exponential = false;  // |elasticity| < 0.5
  bool bounded = false;      // envelope_ratio <= 1.5
  bool accepted() const { return exponential && bounded; }
};

struct GroundState {
  RealField U;
  double a = 0.0;           // multiplier in −ΔU + aU = (W∗U²)U
  double rho = 0.0;         // ‖U‖²
  double gamma = 0.0;       // Γ = J(U)
  double lambda_cap = 0.0;  // Λ = 𝓔(U)
  double energy_Ea = 0.0;   // ¼(‖∇U‖² + a‖U‖²)
  double kinetic = 0.0;
  double dd = 0.0;
  int iterations = 0;
  std::optional<DecayFit> decay;
};

struct FlowResult {
  ComplexField u;
  int iterations = 0;
  std::vector<double> energies;  // 𝓔 after every accepted step, seed first
  double dt = 0.0;               // step in use when the flow stopped
};

namespace detail {

inline double normalize_to(ComplexField& u, double rho) {
  const double m = l2_sq(u);
  if (!std::isfinite(m)) throw NumericalError("gradient flow produced a non-finite field");
  if (m < 1e-300) throw NumericalError("gradient flow collapsed to the zero field");
  u *= std::sqrt(rho / m);
  return m;
}

struct FlowPoint {
  ComplexField u;
  RealField phi;
  double kinetic = 0.0, dd = 0.0, E = 0.0;
};

inline FlowPoint evaluate(ComplexField u, const Kernel& kern) {
  FlowPoint p;
  p.phi = hartree_potential(u, kern);
  p.kinetic = kinetic(u);
  p.dd = dd(u, p.phi);
  p.E = 0.5 * p.kinetic - 0.25 * p.dd;
  p.u = std::move(u);
  return p;
}

}  // namespace detail

/// Projected gradient flow for 𝓔 on ‖u‖² = rho. One step is backward Euler
/// in the Laplacian with a stabilizing shift s ≥ γ:
///   (1/dt + s − Δ) ũ = (1/dt + s − γ + φ) u,  γ = (𝔻 − ‖∇u‖²)/rho,
/// followed by rescaling to the constraint. The right-hand side multiplies u
/// by a positive function and the left inverse has a positive kernel, so
/// non-negative iterates stay non-negative. Steps that raise the energy are
/// retried with dt halved.
inline FlowResult normalized_flow(ComplexField u, double rho, const Kernel& kern, const SolverParams& p) {
  require(rho > 0.0, "target mass must be positive");
  require(p.dt > 0.0 && p.tol > 0.0 && p.max_iter > 0, "solver needs dt > 0, tol > 0, max_iter > 0");
  require(u.grid() == kern.grid(), "seed and kernel live on different grids");
  detail::normalize_to(u, rho);
  detail::FlowPoint cur = detail::evaluate(std::move(u), kern);

  FlowResult out;
  out.energies.push_back(cur.E);
  double dt = p.dt;
  const double dt_floor = p.dt * 1e-6;
  int accepted = 0;
  while (accepted <= p.max_iter) {
    const double gamma = (cur.dd - cur.kinetic) / rho;
    const double s = std::max(gamma, 0.0);
    const double shift = 1.0 / dt + s;
    ComplexField rhs = cur.u;
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] *= shift - gamma + cur.phi[i];
    ComplexField next = screened_inverse(rhs, shift);
    detail::normalize_to(next, rho);
    detail::FlowPoint trial = detail::evaluate(std::move(next), kern);

    if (trial.E > cur.E + 1e-13 * std::abs(cur.E)) {
      dt *= 0.5;
      if (dt < dt_floor) throw NumericalError("gradient flow energy increased even at tiny steps (dt too large)");
      continue;
    }
    const double decrease = (cur.E - trial.E) / std::max(std::abs(trial.E), 1e-300);
    cur = std::move(trial);
    out.energies.push_back(cur.E);
    if (decrease < p.tol) {
      out.u = std::move(cur.u);
      out.iterations = accepted;
      out.dt = dt;
      return out;
    }
    ++accepted;
  }
  throw NumericalError("gradient flow did not converge within max_iter steps");
}

/// Index of the largest |u|; ties go to the lexicographically smallest index.
template <class T>
std::size_t argmax_modulus(const Field<T>& u) {
  std::size_t best = 0;
  double m = -1.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    if (std::abs(u[i]) > m) {
      m = std::abs(u[i]);
      best = i;
    }
  return best;
}

/// Translates u by whole cells so its maximum modulus sits at the origin.
template <class T>
Field<T> center_maximum(const Field<T>& u) {
  const Grid3& g = u.grid();
  const Index3 at = g.unravel(argmax_modulus(u));
  const long c = g.n() / 2;
  return shift_field(u, {c - at[0], c - at[1], c - at[2]});
}

/// Fills the energy ledger of a real profile for multiplier a.
inline GroundState make_ground_state(RealField U, double a, const Kernel& kern) {
  GroundState gs;
  const ComplexField u = to_complex(U);
  gs.kinetic = kinetic(u);
  gs.rho = l2_sq(u);
  gs.dd = dd(u, kern);
  gs.a = a;
  gs.lambda_cap = 0.5 * gs.kinetic - 0.25 * gs.dd;
  gs.gamma = gs.lambda_cap + 0.5 * a * gs.rho;
  gs.energy_Ea = 0.25 * (gs.kinetic + a * gs.rho);
  gs.U = std::move(U);
  return gs;
}

inline ComplexField seed_field(const Grid3& g, const SeedProfile& seed) {
  if (seed.field) {
    require(seed.field->grid() == g, "seed field lives on a different grid");
    return *seed.field;
  }
  require(seed.width > 0.0, "seed width must be positive");
  const double w2 = seed.width * seed.width;
  return sample<cplx>(g, [w2](const Vec3& x) { return std::exp(-dot(x, x) / (2.0 * w2)); });
}

/// Real profile Re(e^{−iθ}u) with θ = arg⟨u, |u|⟩. For a minimizer this is
/// |u| wherever the grid resolves the profile; on under-resolved grids the
/// discrete minimizer carries small negative Gibbs lobes, which are kept so
/// that the discrete equation still holds.
inline RealField align_phase(const ComplexField& u) {
  const cplx c = inner(u, to_complex(modulus(u)));
  const cplx rot = std::abs(c) > 0.0 ? std::conj(c) / std::abs(c) : cplx{1.0};
  RealField r(u.grid());
  for (std::size_t i = 0; i < u.size(); ++i) r[i] = (rot * u[i]).real();
  return r;
}

/// Rayleigh quotient (𝔻 − ‖∇u‖²)/‖u‖², the Lagrange multiplier on the sphere.
inline double rayleigh_multiplier(const ComplexField& u, const Kernel& kern) {
  return (dd(u, kern) - kinetic(u)) / l2_sq(u);
}

/// Minimizes 𝓔 on the sphere ‖u‖² = rho; the multiplier is the Rayleigh
/// quotient of the converged profile.
inline GroundState solve_constrained(double rho, const Kernel& kern, const SolverParams& p) {
  require(rho > 0.0, "mass rho must be positive");
  const Grid3& g = kern.grid();
  FlowResult flow = normalized_flow(seed_field(g, p.seed), rho, kern, p);
  RealField U = align_phase(center_maximum(flow.u));
  const double a = rayleigh_multiplier(to_complex(U), kern);
  GroundState gs = make_ground_state(std::move(U), a, kern);
  gs.iterations = flow.iterations;
  return gs;
}

/// T^λ u = λ² u(λx) by spectral interpolation; ‖T^λu‖² = λ‖u‖². Fails when
/// λ < 1 would push more than 1e−6 of the mass beyond the domain.
template <class T>
Field<T> rescale_T(const Field<T>& u, double lambda) {
  require(lambda > 0.0, "rescaling factor must be positive");
  if (lambda == 1.0) return u;
  if (lambda < 1.0 && mass_outside(u, lambda) > 1e-6)
    throw ConfigError("rescaled profile does not fit the grid (tail mass beyond " + std::to_string(lambda) +
                      "L exceeds 1e-6)");
  return (lambda * lambda) * dilate(u, lambda);
}

/// Ground state with prescribed multiplier a: solve at a reference mass,
/// transport with T^λ, λ = √(a/γ), then polish on the grid. The polish
/// corrects the mass with the continuum law a ∝ ρ² until the Rayleigh
/// multiplier matches a. The default reference mass 3√a is the guess
/// ρ = 3Γ/a with Γ = a = 1 moved to the target scale, so the reference
/// profile already has roughly the size of the answer.
inline GroundState solve_free(double a, const Kernel& kern, const SolverParams& p, double rho_ref = 0.0) {
  require(a > 0.0, "multiplier a must be positive");
  if (rho_ref <= 0.0) rho_ref = 3.0 * std::sqrt(a);
  const GroundState ref = solve_constrained(rho_ref, kern, p);
  if (!(ref.a > 0.0)) throw NumericalError("reference solve produced a non-positive multiplier");
  const double lambda = std::sqrt(a / ref.a);
  ComplexField u = to_complex(rescale_T(ref.U, lambda));
  double rho = lambda * rho_ref;
  int iterations = ref.iterations;
  SolverParams polish = p;
  for (int round = 0; round < 8; ++round) {
    polish.seed.field = std::move(u);
    FlowResult flow = normalized_flow(*polish.seed.field, rho, kern, polish);
    iterations += flow.iterations;
    u = std::move(flow.u);
    const double got = rayleigh_multiplier(u, kern);
    if (!(got > 0.0)) throw NumericalError("polish step produced a non-positive multiplier");
    if (std::abs(got / a - 1.0) < 1e-8) break;
    rho *= std::sqrt(a / got);
  }
  GroundState gs = make_ground_state(align_phase(center_maximum(u)), a, kern);
  gs.iterations = iterations;
  return gs;
}

/// Ψ(m) = −½ (3/(aρ))^{−3} m^{−2}.
inline double psi_map(double m, double a, double rho) {
  require(m > 0.0, "psi_map needs m > 0");
  require(a > 0.0 && rho > 0.0, "psi_map needs a > 0 and rho > 0");
  const double q = a * rho / 3.0;
  return -0.5 * q * q * q / (m * m);
}

inline double psi_inverse(double c, double a, double rho) {
  require(c < 0.0, "psi_inverse needs c < 0");
  require(a > 0.0 && rho > 0.0, "psi_inverse needs a > 0 and rho > 0");
  const double q = a * rho / 3.0;
  return std::sqrt(-q * q * q / (2.0 * c));
}

/// Relative deviations of the identities a ground state must satisfy.
struct VirialReport {
  bool degenerate = false;
  double gradient = 0.0;   // ‖∇U‖²/Γ − 1
  double mass = 0.0;       // a‖U‖²/(3Γ) − 1
  double pohozaev = 0.0;   // Pohozaev residual / 𝔻
  double dd_balance = 0.0; // 𝔻/(‖∇U‖² + a‖U‖²) − 1
  double least_energy = 0.0;  // Γ / (¼(‖∇U‖² + a‖U‖²)) − 1

  double worst() const {
    if (degenerate) return std::numeric_limits<double>::infinity();
    return std::max({std::abs(gradient), std::abs(mass), std::abs(pohozaev), std::abs(dd_balance),
                     std::abs(least_energy)});
  }
  bool passes(double tol) const { return worst() < tol; }
};

inline VirialReport virial_report(const RealField& U, double a, const Kernel& kern) {
  const ComplexField u = to_complex(U);
  const EnergyReport e = energy_report(u, a, kern);
  VirialReport v;
  const double la = 0.25 * (e.kinetic + a * e.mass);
  if (!(e.mass > 0.0) || !(e.dd > 0.0) || !(e.J > 0.0) || !(la > 0.0)) {
    v.degenerate = true;
    return v;
  }
  v.gradient = e.kinetic / e.J - 1.0;
  v.mass = a * e.mass / (3.0 * e.J) - 1.0;
  v.pohozaev = e.pohozaev_residual / e.dd;
  v.dd_balance = e.dd / (e.kinetic + a * e.mass) - 1.0;
  v.least_energy = e.J / la - 1.0;
  return v;
}

inline VirialReport virial_report(const GroundState& gs, const Kernel& kern) { return virial_report(gs.U, gs.a, kern); }

struct ScalePoint {
  double t = 0.0;
  double measured = 0.0;     // J(U(·/t))
  double closed_form = 0.0;  // Γ(t/2 + 3t³/2 − t⁵)
};

inline double scale_path_closed_form(double gamma, double t) {
  return gamma * (0.5 * t + 1.5 * t * t * t - std::pow(t, 5));
}

inline ScalePoint scale_path_energy(const GroundState& gs, const Kernel& kern, double t) {
  require(t > 0.0, "scale parameter t must be positive");
  const double lambda = 1.0 / t;
  if (lambda < 1.0 && mass_outside(gs.U, lambda) > 1e-6)
    throw ConfigError("dilated profile U(x/t) does not fit the grid at t = " + std::to_string(t));
  const ComplexField v = to_complex(dilate(gs.U, lambda));
  return {t, energy_report(v, gs.a, kern).J, scale_path_closed_form(gs.gamma, t)};
}

/// Exponential envelope fit of a decaying profile centered at the origin.
/// Samples are the nodes inside the inscribed ball where U lies in
/// [1e−8, 1e−2]·max U. log U is fitted by a line (giving C, σ) and by a
/// parabola; the parabola's elasticity d log|slope|/d log r at mid-shell is
/// 0 for e^{−σr} (times powers of r it stays small), 1 for a Gaussian and
/// −1 for an algebraic tail.
inline DecayFit decay_fit(const RealField& U, const Vec3& center = {0.0, 0.0, 0.0}) {
  const Grid3& g = U.grid();
  const double top = sup_norm(U);
  require(top > 0.0, "decay fit of the zero field");
  std::vector<double> rs, ls;
  const long n = g.n();
  const double L = g.half_width();
  double lo_val = top, hi_val = 0.0;
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      for (long l = 0; l < n; ++l) {
        const double v = std::abs(U.at(i, j, l));
        if (v < 1e-8 * top || v > 1e-2 * top) continue;
        const double r = norm(g.point(i, j, l) - center);
        if (r >= L) continue;
        rs.push_back(r);
        ls.push_back(std::log(v));
        lo_val = std::min(lo_val, v);
        hi_val = std::max(hi_val, v);
      }
  if (rs.size() < 10 || hi_val < 100.0 * lo_val)
    throw NumericalError("decay fit: insufficient dynamic range (need two decades inside the fit shell)");

  // Normal equations in the centred variable s = r − r̄ for conditioning.
  const std::size_t m = rs.size();
  double rmin = rs[0], rmax = rs[0], rbar = 0.0;
  for (double r : rs) {
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
    rbar += r;
  }
  rbar /= static_cast<double>(m);
  double S[5] = {0, 0, 0, 0, 0}, T[3] = {0, 0, 0};
  for (std::size_t k = 0; k < m; ++k) {
    const double s = rs[k] - rbar;
    double p = 1.0;
    for (int e = 0; e < 5; ++e) {
      S[e] += p;
      if (e < 3) T[e] += p * ls[k];
      p *= s;
    }
  }
  DecayFit f;
  f.samples = m;
  // Line: ls = c0 + c1 s.
  const double det2 = S[0] * S[2] - S[1] * S[1];
  if (!(std::abs(det2) > 0.0)) throw NumericalError("decay fit: degenerate radial spread");
  const double c1 = (S[0] * T[1] - S[1] * T[0]) / det2;
  const double c0 = (T[0] - c1 * S[1]) / S[0];
  f.sigma = -c1;
  f.C = std::exp(c0 + f.sigma * rbar);
  // Parabola: ls = q0 + q1 s + q2 s² (3x3 Cramer).
  const double A[3][3] = {{S[0], S[1], S[2]}, {S[1], S[2], S[3]}, {S[2], S[3], S[4]}};
  auto det3 = [](const double M[3][3]) {
    return M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1]) - M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0]) +
           M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0]);
  };
  const double d = det3(A);
  double q[3] = {0, 0, 0};
  for (int c = 0; c < 3; ++c) {
    double M[3][3];
    for (int r = 0; r < 3; ++r)
      for (int cc = 0; cc < 3; ++cc) M[r][cc] = cc == c ? T[r] : A[r][cc];
    q[c] = det3(M) / d;
  }
  // Slope of the parabola at the middle of the shell, r_mid = (rmin + rmax)/2.
  const double smid = 0.5 * (rmin + rmax) - rbar;
  const double slope = q[1] + 2.0 * q[2] * smid;
  f.elasticity = slope != 0.0 ? 2.0 * q[2] * (smid + rbar) / slope : std::numeric_limits<double>::infinity();
  double ratio = 0.0;
  for (std::size_t k = 0; k < m; ++k) ratio = std::max(ratio, std::exp(ls[k]) / (f.C * std::exp(-f.sigma * rs[k])));
  f.envelope_ratio = ratio;
  f.exponential = f.sigma > 0.0 && std::abs(f.elasticity) < 0.5;
  f.bounded = ratio <= 1.5;
  return f;
}

inline DecayFit decay_fit(const GroundState& gs) { return decay_fit(gs.U); }

}  // namespace choquard
