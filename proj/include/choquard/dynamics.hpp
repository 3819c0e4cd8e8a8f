#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "choquard/ground_state.hpp"

namespace choquard {

struct EvolutionState {
  ComplexField u;
  double t = 0.0;
  double charge0 = 0.0;  // ‖u(0)‖²
  double energy0 = 0.0;  // 𝓔(u(0))
};

/// 𝓔(u) = ½‖∇u‖² − ¼𝔻(u); kern == nullptr means the free equation.
inline double evolution_energy(const ComplexField& u, const Kernel* kern) {
  const double k = kinetic(u);
  return kern ? 0.5 * k - 0.25 * dd(u, *kern) : 0.5 * k;
}

inline EvolutionState make_evolution_state(ComplexField u0, const Kernel* kern) {
  require(u0.all_finite(), "initial field has non-finite values");
  EvolutionState s;
  s.charge0 = l2_sq(u0);
  s.energy0 = evolution_energy(u0, kern);
  s.u = std::move(u0);
  return s;
}

/// Strang splitting for i u_t + Δu + (W∗|u|²)u = 0. The potential substep
/// u ↦ e^{iτφ}u leaves |u| unchanged, so φ computed after the free flight is
/// exactly the potential for the next step's first half: one convolution per
/// step.
class StrangStepper {
 public:
  StrangStepper(EvolutionState state, const Kernel* kern) : s_(std::move(state)), kern_(kern) {
    if (kern_) {
      require(kern_->grid() == s_.u.grid(), "kernel and field live on different grids");
      phi_ = hartree_potential(s_.u, *kern_);
    }
  }

  void step(double dt) {
    rotate(0.5 * dt);
    free_flight(dt);
    if (kern_) phi_ = hartree_potential(s_.u, *kern_);
    rotate(0.5 * dt);
    s_.t += dt;
  }

  const EvolutionState& state() const { return s_; }
  EvolutionState& state() { return s_; }
  const RealField& potential() const { return phi_; }

  /// 𝓔 of the current field, reusing the cached potential.
  double energy() const {
    const double k = kinetic(s_.u);
    return kern_ ? 0.5 * k - 0.25 * dd(s_.u, phi_) : 0.5 * k;
  }

 private:
  void rotate(double tau) {
    if (!kern_) return;
    for (std::size_t i = 0; i < s_.u.size(); ++i) s_.u[i] *= std::polar(1.0, tau * phi_[i]);
  }

  void free_flight(double dt) {
    const Grid3& g = s_.u.grid();
    const long n = g.n();
    fft::cube(static_cast<int>(n)).forward(s_.u.data());
    // e^{−i dt k²} factorizes over axes.
    std::vector<cplx> f(static_cast<std::size_t>(n));
    for (long j = 0; j < n; ++j) f[static_cast<std::size_t>(j)] = std::polar(1.0, -dt * g.wavenumber(j) * g.wavenumber(j));
    const double norm = 1.0 / static_cast<double>(g.size());
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < n; ++j) {
        const cplx fij = f[static_cast<std::size_t>(i)] * f[static_cast<std::size_t>(j)] * norm;
        cplx* row = &s_.u.at(i, j, 0);
        for (long l = 0; l < n; ++l) row[l] *= fij * f[static_cast<std::size_t>(l)];
      }
    fft::cube(static_cast<int>(n)).backward(s_.u.data());
  }

  EvolutionState s_;
  const Kernel* kern_;
  RealField phi_;
};

/// One Strang step from a fresh state (recomputes the potential).
inline EvolutionState step_strang(EvolutionState state, double dt, const Kernel* kern) {
  require(dt != 0.0 && std::isfinite(dt), "time step must be finite and non-zero");
  StrangStepper st(std::move(state), kern);
  st.step(dt);
  return std::move(st.state());
}

struct OrbitDistance {
  double value = 0.0;
  Index3 best_shift{0, 0, 0};
  double best_phase = 0.0;  // in [0, 2π)
};

namespace detail {

/// H¹ weight 1 + Σ k_j², with the Nyquist mode dropped from the gradient part
/// to match derivative().
inline double h1_weight(const Grid3& g, long i, long j, long l) {
  double w = 1.0;
  for (long q : {i, j, l})
    if (!g.is_nyquist(q)) w += g.wavenumber(q) * g.wavenumber(q);
  return w;
}

}  // namespace detail

/// min over integer shifts y and phases θ of ‖u − e^{iθ}U(· − y)‖_{H¹}. For
/// each y the optimal θ is arg⟨u, U_y⟩_{H¹}, leaving ‖u‖² + ‖U‖² − 2|⟨u, U_y⟩|;
/// the H¹ cross-correlation over all y comes from one spectral product. The
/// reported value is recomputed directly from the difference field.
inline OrbitDistance orbit_distance(const ComplexField& u, const ComplexField& reference) {
  require_same_grid(u.grid(), reference.grid());
  const Grid3& g = u.grid();
  const long n = g.n();
  ComplexField uh = to_spectrum(u);
  const ComplexField Uh = to_spectrum(reference);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      for (long l = 0; l < n; ++l) uh.at(i, j, l) *= detail::h1_weight(g, i, j, l) * std::conj(Uh.at(i, j, l));
  const ComplexField corr = from_spectrum(std::move(uh));
  const std::size_t best = argmax_modulus(corr);
  const Index3 m = g.unravel(best);
  OrbitDistance d;
  for (int c = 0; c < 3; ++c) d.best_shift[c] = m[c] < n / 2 ? m[c] : m[c] - n;
  const cplx c = corr[best];
  double theta = std::abs(c) > 0.0 ? std::arg(c) : 0.0;
  if (theta < 0.0) theta += 2.0 * pi;
  d.best_phase = theta;
  ComplexField diff = shift_field(reference, d.best_shift);
  diff *= -std::polar(1.0, theta);
  diff += u;
  d.value = std::sqrt(h1_sq(diff));
  return d;
}

inline OrbitDistance orbit_distance(const ComplexField& u, const GroundState& gs) {
  return orbit_distance(u, to_complex(gs.U));
}

struct EvolutionSample {
  double t = 0.0;
  double charge_drift = 0.0;
  double energy_drift = 0.0;
  double orbit_distance = std::numeric_limits<double>::quiet_NaN();
  double best_phase = std::numeric_limits<double>::quiet_NaN();
};

struct EvolveOptions {
  int sample_every = 100;
  const ComplexField* reference = nullptr;  // enables orbit distance
  bool energy = true;
};

/// Integrates to time T with fixed step dt and samples the monitors every
/// sample_every steps and at the end.
inline std::vector<EvolutionSample> evolve(const ComplexField& u0, double T, double dt, const Kernel* kern,
                                           const EvolveOptions& opt = {}) {
  require(T >= 0.0 && std::isfinite(T), "final time must be non-negative");
  require(dt > 0.0, "time step must be positive");
  require(opt.sample_every > 0, "sample stride must be positive");
  const long steps = std::lround(T / dt);
  require(std::abs(static_cast<double>(steps) * dt - T) <= 1e-9 * std::max(1.0, T),
          "final time must be an integer multiple of dt");
  StrangStepper st(make_evolution_state(u0, kern), kern);
  std::vector<EvolutionSample> out;
  auto record = [&] {
    const EvolutionState& s = st.state();
    if (!s.u.all_finite()) throw NumericalError("evolution produced non-finite values at t = " + std::to_string(s.t));
    EvolutionSample smp;
    smp.t = s.t;
    smp.charge_drift = std::abs(l2_sq(s.u) - s.charge0) / s.charge0;
    if (opt.energy) smp.energy_drift = std::abs(st.energy() - s.energy0) / std::max(std::abs(s.energy0), 1e-300);
    if (opt.reference) {
      const OrbitDistance d = orbit_distance(s.u, *opt.reference);
      smp.orbit_distance = d.value;
      smp.best_phase = d.best_phase;
    }
    out.push_back(smp);
  };
  record();
  for (long k = 1; k <= steps; ++k) {
    st.step(dt);
    st.state().t = static_cast<double>(k) * dt;
    if (k % opt.sample_every == 0 || k == steps) record();
  }
  return out;
}

/// Random perturbation with complex Gaussian coefficients on the modes
/// |mode_d| < n/16 (lowest eighth of the spectrum), scaled to ‖v‖_{H¹} = δ.
inline ComplexField band_limited_perturbation(const Grid3& g, double delta, std::uint64_t seed) {
  require(delta >= 0.0, "perturbation size must be non-negative");
  ComplexField vh(g);
  if (delta == 0.0) return vh;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const long n = g.n();
  const long band = std::max(1L, n / 16);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      for (long l = 0; l < n; ++l) {
        if (std::abs(g.mode(i)) >= band || std::abs(g.mode(j)) >= band || std::abs(g.mode(l)) >= band) continue;
        const double re = normal(rng);
        const double im = normal(rng);
        vh.at(i, j, l) = {re, im};
      }
  ComplexField v = from_spectrum(std::move(vh));
  v *= delta / std::sqrt(h1_sq(v));
  return v;
}

struct StabilityTrial {
  std::uint64_t seed = 0;
  double sup_distance = 0.0;
  std::vector<EvolutionSample> series;
};

struct StabilityResult {
  double max_distance = 0.0;
  std::vector<StabilityTrial> trials;
};

/// Evolves U + δv for `trials` seeded perturbations and records the largest
/// orbit distance to {e^{iθ}U(· − y)} seen along each run.
inline StabilityResult stability_experiment(const GroundState& gs, double delta, double T, double dt,
                                            const Kernel& kern, int trials, std::uint64_t seed = 1,
                                            int sample_every = 100) {
  require(trials > 0, "need at least one trial");
  const ComplexField U = to_complex(gs.U);
  StabilityResult r;
  for (int k = 0; k < trials; ++k) {
    StabilityTrial tr;
    tr.seed = seed + static_cast<std::uint64_t>(k);
    ComplexField u0 = U + band_limited_perturbation(U.grid(), delta, tr.seed);
    EvolveOptions opt;
    opt.sample_every = sample_every;
    opt.reference = &U;
    tr.series = evolve(u0, T, dt, &kern, opt);
    for (const auto& s : tr.series) tr.sup_distance = std::max(tr.sup_distance, s.orbit_distance);
    r.max_distance = std::max(r.max_distance, tr.sup_distance);
    r.trials.push_back(std::move(tr));
  }
  return r;
}

}  // namespace choquard
