#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "choquard/dynamics.hpp"

using namespace choquard;

namespace {

const Grid3& grid() {
  static const Grid3 g = make_grid(32, 8.0);
  return g;
}

const Kernel& coulomb() {
  static const Kernel k = build_kernel(CoulombSpec{}, grid());
  return k;
}

const GroundState& ground() {
  static const GroundState gs = [] {
    SolverParams p;
    p.dt = 10.0;
    return solve_free(4.0, coulomb(), p);
  }();
  return gs;
}

double max_abs_diff(const ComplexField& a, const ComplexField& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

// i u_t + Δu = 0 sends e^{ik·x} to e^{i(k·x − |k|²t)}.
TEST(Dynamics, FreePlaneWavePhaseIsExact) {
  const Grid3 g = make_grid(16, 3.0);
  const Vec3 k{pi * 2 / 3.0, -pi / 3.0, pi * 5 / 3.0};
  const ComplexField u0 = sample<cplx>(g, [&](const Vec3& x) { return std::polar(1.0, dot(k, x)); });
  EvolutionState s = make_evolution_state(u0, nullptr);
  for (int i = 0; i < 7; ++i) s = step_strang(std::move(s), 0.013, nullptr);
  const ComplexField want = std::polar(1.0, -dot(k, k) * 7 * 0.013) * u0;
  EXPECT_LT(max_abs_diff(s.u, want), 1e-12);
}

// Free Gaussian: e^{-r²/2} → (1 + 2it)^{-3/2} e^{-r²/(2(1 + 2it))}.
TEST(Dynamics, FreeGaussianSpreading) {
  const ComplexField u0 = sample<cplx>(grid(), [](const Vec3& x) { return std::exp(-dot(x, x) / 2); });
  // Short enough that the spread tail stays below 1e-10 at the box edge.
  const double T = 0.25;
  const auto out = evolve(u0, T, 0.05, nullptr);
  StrangStepper st(make_evolution_state(u0, nullptr), nullptr);
  for (int i = 0; i < 5; ++i) st.step(0.05);
  const cplx w = cplx{1.0, 2.0 * T};
  const ComplexField want = sample<cplx>(grid(), [&](const Vec3& x) { return std::pow(w, -1.5) * std::exp(-dot(x, x) / (2.0 * w)); });
  EXPECT_LT(max_abs_diff(st.state().u, want), 1e-8);
  EXPECT_LT(out.back().charge_drift, 1e-13);
  EXPECT_LT(out.back().energy_drift, 1e-12);
}

TEST(Dynamics, ChargeConservedWithNonlinearity) {
  const ComplexField u0 = 1.3 * to_complex(ground().U);
  const auto out = evolve(u0, 0.5, 0.01, &coulomb(), {.sample_every = 10});
  for (const auto& s : out) EXPECT_LT(s.charge_drift, 1e-12);
}

TEST(Dynamics, EnergyErrorIsSecondOrder) {
  const ComplexField u0 = 1.2 * to_complex(ground().U);
  auto drift = [&](double dt) { return evolve(u0, 0.5, dt, &coulomb(), {.sample_every = 1000000}).back().energy_drift; };
  const double r = drift(0.01) / drift(0.005);
  EXPECT_GT(r, 3.5);
  EXPECT_LT(r, 4.5);
}

TEST(Dynamics, StandingWaveKeepsOrbitAndPhase) {
  const ComplexField U = to_complex(ground().U);
  EvolveOptions opt;
  opt.reference = &U;
  opt.sample_every = 50;
  const double T = 1.0;
  const auto out = evolve(U, T, 1e-3, &coulomb(), opt);
  for (const auto& s : out) EXPECT_LT(s.orbit_distance, 1e-4);
  const double want = std::fmod(ground().a * T, 2 * pi);
  EXPECT_NEAR(out.back().best_phase, want, 1e-4);
}

TEST(Dynamics, OrbitDistanceModuloSymmetry) {
  const ComplexField U = to_complex(ground().U);
  const ComplexField v = std::polar(1.0, 1.1) * shift_field(U, {2, -3, 1});
  const OrbitDistance d = orbit_distance(v, U);
  EXPECT_LT(d.value, 1e-10);
  EXPECT_NEAR(d.best_phase, 1.1, 1e-10);
  EXPECT_EQ(d.best_shift, (Index3{2, -3, 1}));
}

TEST(Dynamics, OrbitDistanceBoundedByPlainDistance) {
  const ComplexField U = to_complex(ground().U);
  const ComplexField v = U + band_limited_perturbation(grid(), 0.05, 3);
  EXPECT_LE(orbit_distance(v, U).value, 0.05 + 1e-12);
}

TEST(Dynamics, PerturbationSizeAndDeterminism) {
  const ComplexField a = band_limited_perturbation(grid(), 0.01, 5);
  const ComplexField b = band_limited_perturbation(grid(), 0.01, 5);
  const ComplexField c = band_limited_perturbation(grid(), 0.01, 6);
  EXPECT_NEAR(std::sqrt(h1_sq(a)), 0.01, 1e-14);
  EXPECT_EQ(max_abs_diff(a, b), 0.0);
  EXPECT_GT(max_abs_diff(a, c), 0.0);
  EXPECT_EQ(sup_norm(band_limited_perturbation(grid(), 0.0, 5)), 0.0);
}

TEST(Dynamics, StabilityNegativeControl) {
  const StabilityResult r = stability_experiment(ground(), 0.0, 0.5, 1e-3, coulomb(), 1, 1, 100);
  EXPECT_LT(r.max_distance, 1e-4);
}

TEST(Dynamics, RejectsBadSteps) {
  const ComplexField U = to_complex(ground().U);
  EXPECT_THROW(evolve(U, 1.0, 0.3, &coulomb()), ConfigError);
  EXPECT_THROW(evolve(U, 1.0, -0.1, &coulomb()), ConfigError);
  ComplexField bad = U;
  bad[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(make_evolution_state(bad, &coulomb()), ConfigError);
}
