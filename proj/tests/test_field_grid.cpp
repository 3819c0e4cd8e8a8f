#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "choquard/convolution.hpp"
#include "choquard/error.hpp"
#include "choquard/grid.hpp"
#include "choquard/kernel.hpp"
#include "choquard/spectral.hpp"

using namespace choquard;

namespace {

ComplexField random_field(const Grid3& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  ComplexField u(g);
  for (auto& v : u.values()) v = {nd(rng), nd(rng)};
  return u;
}

RealField gaussian(const Grid3& g, double s, const Vec3& c = {0, 0, 0}) {
  return sample(g, [&](const Vec3& x) {
    const Vec3 d = x - c;
    return std::exp(-dot(d, d) / (2 * s * s));
  });
}

double max_abs_diff(const ComplexField& a, const ComplexField& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(Grid, AcceptsOnlyFftFriendlySizes) {
  EXPECT_NO_THROW(make_grid(8, 1.0));
  EXPECT_NO_THROW(make_grid(24, 1.0));
  EXPECT_NO_THROW(make_grid(48, 1.0));
  EXPECT_THROW(make_grid(10, 1.0), ConfigError);
  EXPECT_THROW(make_grid(40, 1.0), ConfigError);
  EXPECT_THROW(make_grid(4, 1.0), ConfigError);
  EXPECT_THROW(make_grid(16, 0.0), ConfigError);
  EXPECT_THROW(make_grid(16, -2.0), ConfigError);
}

TEST(Grid, OriginSitsAtHalfIndex) {
  const Grid3 g = make_grid(32, 8.0);
  EXPECT_EQ(g.coord(16), 0.0);
  EXPECT_EQ(g.coord(0), -8.0);
  EXPECT_DOUBLE_EQ(g.spacing(), 0.5);
  EXPECT_DOUBLE_EQ(g.cell_volume(), 0.125);
  const auto idx = g.index(3, 5, 7);
  EXPECT_EQ(g.unravel(idx), (Index3{3, 5, 7}));
  EXPECT_EQ(g.index(0, 0, 1), 1u);  // z fastest
}

TEST(Grid, MixedGridsRejected) {
  const ComplexField a(make_grid(16, 4.0)), b(make_grid(16, 5.0));
  EXPECT_THROW(inner(a, b), ConfigError);
}

TEST(Spectral, RoundTripIsIdentity) {
  const Grid3 g = make_grid(24, 3.0);
  const ComplexField u = random_field(g, 1);
  EXPECT_LT(max_abs_diff(from_spectrum(to_spectrum(u)), u), 1e-12);
}

TEST(Spectral, Parseval) {
  const Grid3 g = make_grid(16, 2.0);
  for (unsigned s = 0; s < 5; ++s) {
    const ComplexField u = random_field(g, s);
    EXPECT_NEAR(l2_sq_spectral(u) / l2_sq(u), 1.0, 1e-12);
  }
}

TEST(Spectral, DerivativeOfPlaneWaveIsExact) {
  const Grid3 g = make_grid(16, 2.0);
  const double k = pi * 3 / g.half_width();
  const ComplexField u = sample<cplx>(g, [&](const Vec3& x) { return std::sin(k * x[1]) + 0.0 * x[0]; });
  const ComplexField du = derivative(u, 1);
  const ComplexField want = sample<cplx>(g, [&](const Vec3& x) { return k * std::cos(k * x[1]); });
  EXPECT_LT(max_abs_diff(du, want), 1e-12 * k);
  EXPECT_LT(sup_norm(derivative(u, 0)), 1e-12);
}

TEST(Spectral, LaplacianOfGaussianMatchesClosedForm) {
  const Grid3 g = make_grid(32, 8.0);
  // s = 1.2 keeps both the spectral tail and the boundary value below 1e-9.
  const double s = 1.2;
  const ComplexField u = to_complex(gaussian(g, s));
  const ComplexField want = sample<cplx>(g, [&](const Vec3& x) {
    const double r2 = dot(x, x);
    return (r2 / (s * s * s * s) - 3.0 / (s * s)) * std::exp(-r2 / (2 * s * s));
  });
  EXPECT_LT(max_abs_diff(laplacian(u), want), 1e-8);
}

TEST(Spectral, KineticIsMinusLaplacianPairing) {
  const Grid3 g = make_grid(16, 3.0);
  const ComplexField u = random_field(g, 4);
  const double k = kinetic(u);
  const double pair = -inner(u, laplacian(u)).real();
  EXPECT_NEAR(k / pair, 1.0, 1e-12);
}

TEST(Spectral, ScreenedInverseInvertsShiftedLaplacian) {
  const Grid3 g = make_grid(16, 3.0);
  const ComplexField u = random_field(g, 5);
  const double s = 0.7;
  const ComplexField v = screened_inverse(u, s);
  ComplexField back = s * v;
  back -= laplacian(v);
  EXPECT_LT(max_abs_diff(back, u), 1e-10);
}

TEST(Spectral, ShiftIsPeriodicAndInvertible) {
  const Grid3 g = make_grid(16, 3.0);
  const ComplexField u = random_field(g, 6);
  const ComplexField v = shift_field(u, {3, -5, 17});
  EXPECT_EQ(v.at(3, 11, 1), u.at(0, 0, 0));
  EXPECT_EQ(max_abs_diff(shift_field(v, {-3, 5, -17}), u), 0.0);
}

TEST(Spectral, DilationOfGaussianMatchesClosedForm) {
  const Grid3 g = make_grid(32, 8.0);
  const RealField u = gaussian(g, 1.0);
  for (double lam : {0.8, 1.25}) {
    const RealField v = dilate(u, lam);
    const RealField want = gaussian(g, 1.0 / lam);
    double err = 0;
    for (std::size_t i = 0; i < v.size(); ++i) err = std::max(err, std::abs(v[i] - want[i]));
    EXPECT_LT(err, 1e-8) << "lambda " << lam;
  }
}

TEST(Kernel, CoulombSymbolZeroMode) {
  EXPECT_DOUBLE_EQ(coulomb_symbol(0.0, 3.0), 2 * pi * 9.0);
  // Continuous at k -> 0.
  EXPECT_NEAR(coulomb_symbol(1e-6, 3.0) / coulomb_symbol(0.0, 3.0), 1.0, 1e-10);
}

TEST(Kernel, RejectsShortTruncation) {
  const Grid3 g = make_grid(16, 4.0);
  EXPECT_THROW(build_kernel(CoulombSpec{}, g, 1.0), ConfigError);
}

TEST(Kernel, RejectsNonHomogeneousOrOddTables) {
  const Grid3 g = make_grid(16, 4.0);
  TabulatedSpec sq{[](const Vec3& x) { return 1.0 / dot(x, x); }, "inverse_square", std::nullopt};
  EXPECT_THROW(build_kernel(sq, g), ConfigError);
  TabulatedSpec odd{[](const Vec3& x) { return (1.5 + x[0] / norm(x)) / norm(x); }, "odd", std::nullopt};
  EXPECT_THROW(build_kernel(odd, g), ConfigError);
}

TEST(Kernel, CatalogBrackets) {
  const Grid3 g = make_grid(16, 4.0);
  const Kernel k = build_kernel(anisotropic_table(2, 0.5), g);
  EXPECT_DOUBLE_EQ(k.bracket().first, 1.0);
  EXPECT_DOUBLE_EQ(k.bracket().second, 1.5);
  EXPECT_NEAR(k.value({0, 0, 2}), 1.5 / 2, 1e-15);
  EXPECT_NEAR(k.value({2, 0, 0}), 0.5, 1e-15);
  EXPECT_THROW(anisotropic_table(0, -1.0), ConfigError);
}

// Potential of ρ = e^{-r²/2s²}: M erf(r/(√2 s))/r with M = (2πs²)^{3/2}.
TEST(Convolution, CoulombPotentialOfGaussian) {
  const Grid3 g = make_grid(32, 8.0);
  const double s = 1.0;
  const Kernel k = build_kernel(CoulombSpec{}, g);
  const RealField phi = free_space_convolve(gaussian(g, s), k);
  const double M = std::pow(2 * pi * s * s, 1.5);
  double err = 0, top = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto ix = g.unravel(i);
    const double r = norm(g.point(ix[0], ix[1], ix[2]));
    const double want = r > 0 ? M * std::erf(r / (std::sqrt(2.0) * s)) / r : M * std::sqrt(2.0 / pi) / s;
    err = std::max(err, std::abs(phi[i] - want));
    top = std::max(top, want);
  }
  EXPECT_LT(err / top, 1e-6);
}

TEST(Convolution, FreeSpaceMeansNoPeriodicImages) {
  // An off-centre Gaussian sees the same potential shape as a centred one.
  const Grid3 g = make_grid(32, 8.0);
  const Kernel k = build_kernel(CoulombSpec{}, g);
  const RealField a = free_space_convolve(gaussian(g, 0.8), k);
  const RealField b = free_space_convolve(gaussian(g, 0.8, {g.coord(22), 0, 0}), k);
  // Compare a at index i with b at index i + 6, where both exist.
  double err = 0;
  for (long i = 0; i + 6 < 32; ++i) err = std::max(err, std::abs(a.at(i, 16, 16) - b.at(i + 6, 16, 16)));
  // The shifted Gaussian is clipped at the boundary at the 1e-9 level.
  EXPECT_LT(err / sup_norm(a), 1e-8);
}

TEST(Convolution, PairingIsSymmetricAndPositive) {
  const Grid3 g = make_grid(16, 4.0);
  const Kernel k = build_kernel(CoulombSpec{}, g);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int t = 0; t < 5; ++t) {
    RealField r1(g), r2(g);
    for (auto& v : r1.values()) v = U(rng);
    for (auto& v : r2.values()) v = U(rng);
    const double a = inner(r1, free_space_convolve(r2, k));
    const double b = inner(r2, free_space_convolve(r1, k));
    EXPECT_NEAR(a / b, 1.0, 1e-12);
    RealField d = r1 - r2;
    EXPECT_GT(inner(d, free_space_convolve(d, k)), 0.0);
  }
}

TEST(Convolution, TabulatedInverseDistanceTracksCoulomb) {
  const Grid3 g = make_grid(32, 8.0);
  const Kernel kc = build_kernel(CoulombSpec{}, g);
  const Kernel kt = build_kernel(inverse_distance_table(), g);
  const RealField rho = gaussian(g, 1.0);
  const double a = inner(rho, free_space_convolve(rho, kc));
  const double b = inner(rho, free_space_convolve(rho, kt));
  EXPECT_NEAR(b / a, 1.0, 1e-2);
}

TEST(Convolution, LinearInDensity) {
  const Grid3 g = make_grid(16, 4.0);
  const Kernel k = build_kernel(axis_quadratic_table(1), g);
  const RealField a = gaussian(g, 1.0), b = gaussian(g, 0.7, {1, 0, 0});
  const RealField lhs = free_space_convolve(2.0 * a + b, k);
  const RealField rhs = 2.0 * free_space_convolve(a, k) + free_space_convolve(b, k);
  double err = 0;
  for (std::size_t i = 0; i < lhs.size(); ++i) err = std::max(err, std::abs(lhs[i] - rhs[i]));
  EXPECT_LT(err / sup_norm(lhs), 1e-12);
}
