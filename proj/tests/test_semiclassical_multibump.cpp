#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "choquard/dynamics.hpp"
#include "choquard/multibump.hpp"

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

const GroundState& profile(double a) {
  static std::map<double, GroundState> cache;
  auto it = cache.find(a);
  if (it == cache.end()) {
    SolverParams p;
    p.dt = 10.0;
    // On this box the wide a ≈ 1 profile has a slow translation mode; stop before it drifts.
    p.tol = 1e-9;
    it = cache.emplace(a, solve_free(a, coulomb(), p)).first;
  }
  return it->second;
}

// V = 2 − e^{−|x − M|²/2.25} − e^{−|x + M|²/2.25}, M = (2, 2, 2).
PotentialSpec two_wells(double eps, const LinearVectorPotential& A = {}) {
  PotentialSpec p;
  p.base = 2.0;
  p.m_tilde = 0.5;
  p.beta = 0.22;
  p.epsilon = eps;
  p.A = A;
  for (double s : {1.0, -1.0}) {
    Well w;
    w.center = {2 * s, 2 * s, 2 * s};
    w.shape = WellShape::gaussian;
    w.strength = 1.0;
    w.width = 1.5;
    w.region = Region::ball(w.center, 2.3);
    p.wells.push_back(w);
  }
  return p;
}

PotentialSpec single_well(double eps) {
  PotentialSpec p;
  p.base = 1.0;
  p.m_tilde = 0.5;
  p.beta = 0.9;
  p.epsilon = eps;
  Well w;
  w.strength = 0.1;
  w.region = Region::ball({0, 0, 0}, 10.0);
  p.wells.push_back(w);
  return p;
}

BumpSet bumps_for(const PotentialSpec& p, std::vector<double> phases = {}) {
  BumpSet b;
  for (std::size_t i = 0; i < p.wells.size(); ++i) {
    Bump x;
    x.well = static_cast<int>(i);
    x.center = p.wells[i].center;
    x.profile = profile(p.well_minimum(i));
    x.phase = i < phases.size() ? phases[i] : 0.0;
    b.push_back(std::move(x));
  }
  return b;
}

}  // namespace

TEST(Penalty, ClampAndPower) {
  EXPECT_EQ(penalty(0.0), 0.0);
  EXPECT_EQ(penalty(1.0), 0.0);
  EXPECT_EQ(penalty(0.999), 0.0);
  EXPECT_DOUBLE_EQ(penalty(2.0), 1.0);
  EXPECT_DOUBLE_EQ(penalty(5.0), 32.0);
}

// (t − 1)_+^{5/2} is convex and vanishes at 0, hence superadditive.
TEST(Penalty, SuperadditiveOnDisjointPairs) {
  const PotentialSpec p = two_wells(0.5);
  const ScaledPotential sp(p, grid());
  const double w = p.chi_weight();
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> amp(0.0, 0.3);
  std::uniform_int_distribution<long> pick(0, 31);
  for (int t = 0; t < 20; ++t) {
    ComplexField u1(grid()), u2(grid());
    // u1 on the lower x-half, u2 on the upper, both partly outside O.
    for (int k = 0; k < 200; ++k) {
      const long i = pick(rng) % 16, j = pick(rng), l = pick(rng);
      u1.at(i, j, l) = amp(rng);
      u2.at(i + 16, j, l) = amp(rng);
    }
    const double q1 = penalty(w * outside_mass(u1, sp.outside));
    const double q2 = penalty(w * outside_mass(u2, sp.outside));
    const double q12 = penalty(w * outside_mass(u1 + u2, sp.outside));
    EXPECT_GE(q12, q1 + q2) << "pair " << t;
  }
}

TEST(Penalty, WeightFollowsEpsilon) {
  PotentialSpec p = two_wells(0.25);
  EXPECT_DOUBLE_EQ(p.chi_weight(), 4.0);
  p.mu = 3.0;
  EXPECT_DOUBLE_EQ(p.chi_weight(), 16.0);
}

TEST(Potential, ValidationCatchesBadGeometry) {
  EXPECT_NO_THROW(validate(two_wells(0.5)));
  PotentialSpec p = two_wells(0.5);
  p.beta = 0.3;  // δ = 0.23
  EXPECT_THROW(validate(p), ConfigError);
  p = two_wells(0.5);
  p.m_tilde = 1.5;
  EXPECT_THROW(validate(p), ConfigError);
  p = two_wells(0.5);
  p.wells[1].region = Region::ball(p.wells[1].center, 4.0);
  EXPECT_THROW(validate(p), ConfigError);
  // A shallow well on the slope of a deep one: its center is not the minimizer.
  p = single_well(0.5);
  Well w;
  w.center = {3, 0, 0};
  w.shape = WellShape::gaussian;
  w.strength = 0.5;
  w.region = Region::ball(w.center, 0.5);
  p.wells.push_back(w);
  try {
    validate(p);
    ADD_FAILURE() << "expected a ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("minimizer"), std::string::npos) << e.what();
  }
  EXPECT_NEAR(two_wells(0.5).delta(), 0.1 * std::min(2.3, std::sqrt(48.0) - 4.6), 1e-12);
}

TEST(Ansatz, CutoffShape) {
  EXPECT_EQ(cutoff(0.0, 1.0), 1.0);
  EXPECT_EQ(cutoff(1.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(cutoff(1.5, 1.0), 0.5);
  EXPECT_EQ(cutoff(2.0, 1.0), 0.0);
  // Flat first and second derivatives at both ends.
  const double h = 1e-4;
  for (double r : {1.0, 2.0}) {
    const double d1 = (cutoff(r + h, 1.0) - cutoff(r - h, 1.0)) / (2 * h);
    const double d2 = (cutoff(r + h, 1.0) - 2 * cutoff(r, 1.0) + cutoff(r - h, 1.0)) / (h * h);
    EXPECT_NEAR(d1, 0.0, 1e-6);
    EXPECT_NEAR(d2, 0.0, 1e-2);
  }
}

TEST(Ansatz, CentersMustBeGridNodes) {
  PotentialSpec p = two_wells(0.3);
  EXPECT_THROW(build_ansatz(bumps_for(p), p, grid()), ConfigError);
}

TEST(Ansatz, ProfileMultiplierMustMatchWell) {
  const PotentialSpec p = two_wells(0.5);
  BumpSet b = bumps_for(p);
  b[0].profile = profile(2.0);
  EXPECT_THROW(build_ansatz(b, p, grid()), ConfigError);
}

TEST(Ansatz, AdmissibleAnsatzHasNoPenalty) {
  // Centers (±2, ±2, ±2)/ε must be interior grid nodes of the L = 8 box.
  for (double eps : {0.5, 0.4}) {
    const PotentialSpec p = two_wells(eps, LinearVectorPotential::uniform_field({0, 0, 0.1}));
    const ScaledPotential sp(p, grid());
    const GammaReport G = gamma_eps(build_ansatz(bumps_for(p), p, grid()), sp, coulomb());
    EXPECT_EQ(G.Q, 0.0);
    EXPECT_EQ(G.outside_mass, 0.0);
    EXPECT_DOUBLE_EQ(G.Gamma, G.F);
  }
}

// Two radial densities with disjoint supports interact like point masses.
TEST(Ansatz, SeparatedBumpsInteractAsPointMasses) {
  const PotentialSpec p = two_wells(0.5);
  const ScaledPotential sp(p, grid());
  const BumpSet b = bumps_for(p);
  const ComplexField u1 = bump_field(b[0], p, grid()), u2 = bump_field(b[1], p, grid());
  const double f12 = gamma_eps(u1 + u2, sp, coulomb()).F;
  const double f1 = gamma_eps(u1, sp, coulomb()).F, f2 = gamma_eps(u2, sp, coulomb()).F;
  const double d = norm(b[0].center - b[1].center) / p.epsilon;
  const double want = -0.5 * l2_sq(u1) * l2_sq(u2) / d;
  EXPECT_NEAR((f12 - f1 - f2) / want, 1.0, 1e-2);
}

TEST(Norm, FreeCaseReducesToKineticPlusPotential) {
  const PotentialSpec p = single_well(0.5);
  const ScaledPotential sp(p, grid());
  const ComplexField u = build_ansatz(bumps_for(p), p, grid());
  const RealField vt = sample(grid(), [&](const Vec3& y) { return std::max(0.5, 1.0 + 0.1 * p.epsilon * p.epsilon * dot(y, y)); });
  double pot = 0;
  for (std::size_t i = 0; i < u.size(); ++i) pot += vt[i] * std::norm(u[i]);
  double kin = 0;
  for (const auto& c : gradient(u)) kin += l2_sq(c);
  EXPECT_NEAR(norm_eps_sq(u, sp) / (kin + pot * grid().cell_volume()), 1.0, 1e-10);
}

TEST(Norm, ConstantPotentialIsAGauge) {
  const Vec3 k{2 * pi / grid().half_width(), 0, -pi / grid().half_width()};
  PotentialSpec p = single_well(0.5);
  const ComplexField u = build_ansatz(bumps_for(p), p, grid());
  ComplexField v = u;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto ix = grid().unravel(i);
    v[i] *= std::polar(1.0, dot(k, grid().point(ix[0], ix[1], ix[2])));
  }
  const ScaledPotential plain(p, grid());
  p.A = LinearVectorPotential::constant(k);
  const ScaledPotential shifted(p, grid());
  // The modulation moves spectral content across the dropped Nyquist mode.
  EXPECT_NEAR(norm_eps_sq(v, shifted) / norm_eps_sq(u, plain), 1.0, 1e-4);
}

TEST(Norm, DiamagneticBound) {
  const PotentialSpec p = two_wells(0.5, LinearVectorPotential::uniform_field({0.3, -0.2, 0.5}));
  const ScaledPotential sp(p, grid());
  const ComplexField u = build_ansatz(bumps_for(p, {0.4, 2.0}), p, grid());
  EXPECT_GE(diamagnetic_gap(u, sp.A), -1e-8 * h1_sq(u));
}

TEST(Diagnostics, SingleBumpHasOneMaximumAtTheMinimizer) {
  const PotentialSpec p = single_well(0.25);
  const auto lm = local_maxima(build_ansatz(bumps_for(p), p, grid()), p);
  ASSERT_EQ(lm.size(), 1u);
  EXPECT_EQ(lm[0].well, 0);
  EXPECT_EQ(lm[0].dist_to_minimizer, 0.0);
}

TEST(Diagnostics, ExactAnsatzDecomposesWithPhases) {
  const PotentialSpec p = two_wells(0.5, LinearVectorPotential::uniform_field({0, 0, 0.1}));
  const ScaledPotential sp(p, grid());
  const BumpSet b = bumps_for(p, {0.3, 5.9});
  const ComplexField u = build_ansatz(b, p, grid());
  const auto lm = local_maxima(u, p);
  ASSERT_EQ(lm.size(), 2u);
  const RemainderReport r = decomposition_remainder(u, bumps_at_maxima(lm, b, p), sp);
  EXPECT_LT(r.norm, 1e-10);
  EXPECT_NEAR(r.phases[0], 0.3, 1e-10);
  EXPECT_NEAR(r.phases[1], 5.9, 1e-10);
}

TEST(Diagnostics, NoiseShowsUpInRemainder) {
  const PotentialSpec p = two_wells(0.5);
  const ScaledPotential sp(p, grid());
  const BumpSet b = bumps_for(p);
  const ComplexField u = build_ansatz(b, p, grid()) + band_limited_perturbation(grid(), 0.01, 4);
  const auto lm = local_maxima(u, p);
  ASSERT_EQ(lm.size(), 2u);
  const double r = decomposition_remainder(u, bumps_at_maxima(lm, b, p), sp).norm;
  EXPECT_GT(r, 1e-3);
  EXPECT_LT(r, 0.1);
}

TEST(Diagnostics, BumpMatchingRejectsWrongCount) {
  const PotentialSpec p = two_wells(0.5);
  const BumpSet b = bumps_for(p);
  const auto lm = local_maxima(bump_field(b[0], p, grid()), p);
  EXPECT_THROW(bumps_at_maxima(lm, b, p), NumericalError);
}

TEST(Diagnostics, EnvelopeNeedsAField) {
  EXPECT_THROW(decay_envelope_check(ComplexField(grid()), {Vec3{0, 0, 0}}), NumericalError);
}

TEST(Diagnostics, EnvelopeSeparatesExponentialFromAlgebraic) {
  const ComplexField e = sample<cplx>(grid(), [](const Vec3& x) { return std::exp(-1.5 * norm(x)); });
  const EnvelopeCheck ce = decay_envelope_check(e, {Vec3{0, 0, 0}});
  EXPECT_TRUE(ce.pass);
  EXPECT_NEAR(ce.C2, 1.5, 0.1);
  const ComplexField a = sample<cplx>(grid(), [](const Vec3& x) { return 1.0 / std::pow(1 + dot(x, x), 2); });
  EXPECT_FALSE(decay_envelope_check(a, {Vec3{0, 0, 0}}).pass);
}

TEST(Relax, GammaNonIncreasingAndMassKept) {
  const PotentialSpec p = two_wells(0.5);
  const ScaledPotential sp(p, grid());
  const BumpSet b = bumps_for(p);
  RelaxParams rp;
  rp.steps = 8;
  const RelaxResult r = relax(build_ansatz(b, p, grid()), b, sp, coulomb(), rp);
  ASSERT_GE(r.gamma.size(), 2u);
  for (std::size_t i = 1; i < r.gamma.size(); ++i) EXPECT_LE(r.gamma[i], r.gamma[i - 1]);
  EXPECT_NEAR(l2_sq(r.u) / (b[0].profile.rho + b[1].profile.rho), 1.0, 1e-8);
}

TEST(Relax, SingleBumpEnergyApproachesLimit) {
  const PotentialSpec p = single_well(0.25);
  const ScaledPotential sp(p, grid());
  const BumpSet b = bumps_for(p);
  const double G = gamma_eps(build_ansatz(b, p, grid()), sp, coulomb()).Gamma;
  EXPECT_NEAR(G / b[0].profile.gamma, 1.0, 0.1);
  EXPECT_GT(G, b[0].profile.gamma);
}
