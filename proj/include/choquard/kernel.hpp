#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>

#include "choquard/fft.hpp"
#include "choquard/grid.hpp"

namespace choquard {

/// W(x) = 1/|x| with the analytic truncated-kernel symbol.
struct CoulombSpec {};

/// Any even kernel homogeneous of degree -1, given by point samples.
/// `bracket` optionally declares (C1, C2) with C1/|x| <= W(x) <= C2/|x|.
struct TabulatedSpec {
  std::function<double(const Vec3&)> W;
  std::string name = "tabulated";
  std::optional<std::pair<double, double>> bracket;
};

using KernelSpec = std::variant<CoulombSpec, TabulatedSpec>;

enum class KernelKind : unsigned char { coulomb = 0, tabulated = 1 };

/// Fourier transform of the Coulomb kernel truncated at radius R.
inline double coulomb_symbol(double k, double R) {
  if (k == 0.0) return 2.0 * pi * R * R;
  // 1 - cos(kR) = 2 sin^2(kR/2) avoids cancellation at small k.
  const double s = std::sin(0.5 * k * R);
  return 8.0 * pi * s * s / (k * k);
}

/// Smallest admissible truncation radius: the domain diameter 2√3 L.
inline double default_truncation(const Grid3& g) { return 2.0 * std::sqrt(3.0) * g.half_width(); }

/// Convolution kernel with its free-space multiplier on the doubled grid
/// (2n points per axis, half-complex layout 2n x 2n x (n+1)).
class Kernel {
 public:
  Kernel() = default;

  const Grid3& grid() const { return grid_; }
  KernelKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  double truncation_radius() const { return R_; }
  int doubled() const { return 2 * grid_.n(); }
  std::size_t multiplier_size() const {
    const auto m = static_cast<std::size_t>(doubled());
    return m * m * (m / 2 + 1);
  }
  const AlignedVector<double>& multiplier() const { return multiplier_; }
  double multiplier_at(long qx, long qy, long qz) const {
    const long m = doubled();
    return multiplier_[static_cast<std::size_t>((qx * m + qy) * (m / 2 + 1) + qz)];
  }

  /// Empirical or declared bracket (C1, C2) of |x| W(x).
  std::pair<double, double> bracket() const { return bracket_; }

  /// Pointwise W(x), x != 0. Unavailable for kernels loaded from a cache file.
  double value(const Vec3& x) const {
    if (!W_) throw ConfigError("kernel '" + name_ + "' has no pointwise form (loaded from cache)");
    return W_(x);
  }
  bool has_pointwise() const { return static_cast<bool>(W_); }

  friend Kernel build_kernel(const KernelSpec& spec, const Grid3& g, double R);
  friend Kernel kernel_from_multiplier(const Grid3& g, KernelKind kind, double R, std::string name,
                                       AlignedVector<double> multiplier, std::pair<double, double> bracket);

 private:
  Grid3 grid_;
  KernelKind kind_ = KernelKind::coulomb;
  std::string name_;
  double R_ = 0.0;
  AlignedVector<double> multiplier_;
  std::pair<double, double> bracket_{1.0, 1.0};
  std::function<double(const Vec3&)> W_;
};

namespace detail {

/// Average of a degree -1 homogeneous W over the cell [-h/2, h/2]^3. The
/// cell is split 3x3x3; the 26 outer subcells use 4^3 Gauss points and the
/// central one is the whole cell rescaled by 1/3, whose integral is 1/9 of
/// the total by homogeneity. Solving I = outer + I/9 gives I = 9/8 outer.
inline double origin_cell_average(const std::function<double(const Vec3&)>& W, double h) {
  static constexpr double gx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
  static constexpr double gw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
  const double s = h / 3.0;
  double outer = 0.0;
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b)
      for (int c = -1; c <= 1; ++c) {
        if (a == 0 && b == 0 && c == 0) continue;
        double sub = 0.0;
        for (int p = 0; p < 4; ++p)
          for (int q = 0; q < 4; ++q)
            for (int r = 0; r < 4; ++r) {
              const Vec3 x{s * (a + 0.5 * gx[p]), s * (b + 0.5 * gx[q]), s * (c + 0.5 * gx[r])};
              sub += gw[p] * gw[q] * gw[r] * W(x);
            }
        outer += sub * (s * s * s) / 8.0;
      }
  return (9.0 / 8.0) * outer / (h * h * h);
}

/// Coulomb multiplier: sample the truncated-kernel symbol on a spectral
/// lattice of period 8L (twice the doubled box), transform back to get the
/// band-limited kernel in real space, keep |x_j| <= 2L and transform that on
/// the doubled grid. Both transforms are even, so REDFT00 on one octant
/// gives the full DFT.
inline AlignedVector<double> coulomb_multiplier(const Grid3& g, double R) {
  const int n = g.n();
  const double h = g.spacing();
  const double period = 8.0 * g.half_width();
  const int fine = 2 * n + 1;  // octant of a 4n lattice
  AlignedVector<double> sym(static_cast<std::size_t>(fine) * fine * fine);
  const double dk = 2.0 * pi / period;
  for (int a = 0; a < fine; ++a)
    for (int b = 0; b < fine; ++b)
      for (int c = 0; c < fine; ++c) {
        const double k = dk * std::sqrt(static_cast<double>(a * a + b * b + c * c));
        sym[(static_cast<std::size_t>(a) * fine + b) * fine + c] = coulomb_symbol(k, R);
      }
  {
    auto plan = fft::make_plan([&] {
      return fftw_plan_r2r_3d(fine, fine, fine, sym.data(), sym.data(), FFTW_REDFT00, FFTW_REDFT00, FFTW_REDFT00,
                              FFTW_ESTIMATE);
    });
    fftw_execute(plan.get());
  }
  const int oct = n + 1;
  AlignedVector<double> kern(static_cast<std::size_t>(oct) * oct * oct);
  const double inv_vol = 1.0 / (period * period * period);
  for (int a = 0; a < oct; ++a)
    for (int b = 0; b < oct; ++b)
      for (int c = 0; c < oct; ++c)
        kern[(static_cast<std::size_t>(a) * oct + b) * oct + c] =
            sym[(static_cast<std::size_t>(a) * fine + b) * fine + c] * inv_vol;
  {
    auto plan = fft::make_plan([&] {
      return fftw_plan_r2r_3d(oct, oct, oct, kern.data(), kern.data(), FFTW_REDFT00, FFTW_REDFT00, FFTW_REDFT00,
                              FFTW_ESTIMATE);
    });
    fftw_execute(plan.get());
  }
  const int m = 2 * n;
  const int mh = n + 1;
  AlignedVector<double> mult(static_cast<std::size_t>(m) * m * mh);
  const double h3 = h * h * h;
  for (int qx = 0; qx < m; ++qx)
    for (int qy = 0; qy < m; ++qy)
      for (int qz = 0; qz < mh; ++qz) {
        const int a = std::min(qx, m - qx), b = std::min(qy, m - qy);
        mult[(static_cast<std::size_t>(qx) * m + qy) * mh + qz] =
            h3 * kern[(static_cast<std::size_t>(a) * oct + b) * oct + qz];
      }
  return mult;
}

inline AlignedVector<double> tabulated_multiplier(const Grid3& g, const std::function<double(const Vec3&)>& W,
                                                  std::pair<double, double>& bracket,
                                                  const std::optional<std::pair<double, double>>& declared) {
  const int n = g.n();
  const int m = 2 * n;
  const double h = g.spacing();
  AlignedVector<double> samples(static_cast<std::size_t>(m) * m * m);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  auto signed_mode = [m](int q) { return q < m / 2 ? q : q - m; };
  for (int qx = 0; qx < m; ++qx)
    for (int qy = 0; qy < m; ++qy)
      for (int qz = 0; qz < m; ++qz) {
        const Vec3 x{h * signed_mode(qx), h * signed_mode(qy), h * signed_mode(qz)};
        double w;
        if (qx == 0 && qy == 0 && qz == 0) {
          w = origin_cell_average(W, h);
        } else {
          w = W(x);
          const double r = norm(x);
          if (!std::isfinite(w) || w < 0.0)
            throw ConfigError("tabulated kernel is negative or non-finite at a sample point");
          const double rw = r * w;
          if (declared && (rw < declared->first / 10.0 || rw > 10.0 * declared->second))
            throw ConfigError("tabulated kernel violates its declared growth bracket by more than 10x");
          lo = std::min(lo, rw);
          hi = std::max(hi, rw);
        }
        samples[(static_cast<std::size_t>(qx) * m + qy) * m + qz] = w;
      }
  if (!(hi > 0.0)) throw ConfigError("tabulated kernel vanishes identically");
  bracket = declared ? *declared : std::make_pair(lo, hi);

  const int mh = n + 1;
  AlignedVector<cplx> spec(static_cast<std::size_t>(m) * m * mh);
  {
    auto plan = fft::make_plan([&] {
      return fftw_plan_dft_r2c_3d(m, m, m, samples.data(), fft::as_fftw(spec.data()), FFTW_ESTIMATE);
    });
    fftw_execute(plan.get());
  }
  AlignedVector<double> mult(spec.size());
  const double h3 = h * h * h;
  for (std::size_t i = 0; i < spec.size(); ++i) mult[i] = h3 * spec[i].real();
  return mult;
}

/// Checks W(2x) = W(x)/2 and W(-x) = W(x) on a few probe directions.
inline void check_homogeneous_even(const std::function<double(const Vec3&)>& W) {
  const Vec3 probes[] = {{1, 0, 0}, {0.3, -0.7, 0.2}, {-0.5, 0.5, 0.9}, {0.1, 0.2, -1.3}};
  for (const Vec3& x : probes) {
    const double w1 = W(x), w2 = W(2.0 * x), wm = W(-1.0 * x);
    const double scale = std::max(std::abs(w1), 1e-300);
    if (std::abs(w2 - 0.5 * w1) > 1e-9 * scale) throw ConfigError("tabulated kernel is not homogeneous of degree -1");
    if (std::abs(wm - w1) > 1e-12 * scale) throw ConfigError("tabulated kernel is not even");
  }
}

}  // namespace detail

/// Builds the kernel for grid g. R is the truncation radius used by the
/// Coulomb path and must cover the domain diameter.
inline Kernel build_kernel(const KernelSpec& spec, const Grid3& g, double R) {
  require(R >= default_truncation(g) * (1.0 - 1e-12),
          "truncation radius must be at least the domain diameter 2*sqrt(3)*L");
  Kernel k;
  k.grid_ = g;
  k.R_ = R;
  if (std::holds_alternative<CoulombSpec>(spec)) {
    k.kind_ = KernelKind::coulomb;
    k.name_ = "coulomb";
    k.W_ = [](const Vec3& x) { return 1.0 / norm(x); };
    k.bracket_ = {1.0, 1.0};
    k.multiplier_ = detail::coulomb_multiplier(g, R);
  } else {
    const auto& t = std::get<TabulatedSpec>(spec);
    require(static_cast<bool>(t.W), "tabulated kernel needs a sample function");
    detail::check_homogeneous_even(t.W);
    k.kind_ = KernelKind::tabulated;
    k.name_ = t.name;
    k.W_ = t.W;
    k.multiplier_ = detail::tabulated_multiplier(g, t.W, k.bracket_, t.bracket);
  }
  return k;
}

inline Kernel build_kernel(const KernelSpec& spec, const Grid3& g) { return build_kernel(spec, g, default_truncation(g)); }

inline Kernel kernel_from_multiplier(const Grid3& g, KernelKind kind, double R, std::string name,
                                     AlignedVector<double> multiplier, std::pair<double, double> bracket) {
  Kernel k;
  k.grid_ = g;
  k.kind_ = kind;
  k.R_ = R;
  k.name_ = std::move(name);
  k.bracket_ = bracket;
  require(multiplier.size() == k.multiplier_size(), "kernel multiplier size does not match grid");
  k.multiplier_ = std::move(multiplier);
  if (kind == KernelKind::coulomb) k.W_ = [](const Vec3& x) { return 1.0 / norm(x); };
  return k;
}

// ---------------------------------------------------------------------------
// Catalog kernels.

inline TabulatedSpec inverse_distance_table() {
  return {[](const Vec3& x) { return 1.0 / norm(x); }, "inverse_distance", std::make_pair(1.0, 1.0)};
}

/// W(x) = x_axis^2 / |x|^3 (vanishes on the plane x_axis = 0).
inline TabulatedSpec axis_quadratic_table(int axis) {
  require(axis >= 0 && axis < 3, "axis must be 0, 1 or 2");
  return {[axis](const Vec3& x) {
            const double r = norm(x);
            return x[static_cast<std::size_t>(axis)] * x[static_cast<std::size_t>(axis)] / (r * r * r);
          },
          "axis_quadratic", std::nullopt};
}

/// W(x) = (1 + c x_axis^2/|x|^2)/|x|, bracket (1, 1 + c) for c >= 0.
inline TabulatedSpec anisotropic_table(int axis, double c) {
  require(c > -1.0, "anisotropy must exceed -1 to keep the kernel positive");
  return {[axis, c](const Vec3& x) {
            const double r2 = dot(x, x);
            const double xa = x[static_cast<std::size_t>(axis)];
            return (1.0 + c * xa * xa / r2) / std::sqrt(r2);
          },
          "anisotropic", std::make_pair(std::min(1.0, 1.0 + c), std::max(1.0, 1.0 + c))};
}

}  // namespace choquard
