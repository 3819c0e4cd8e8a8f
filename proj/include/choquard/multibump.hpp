#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "choquard/ground_state.hpp"

namespace choquard {

/// Ball or axis-aligned box in physical (unscaled) space.
struct Region {
  enum class Shape { ball, box };
  Shape shape = Shape::ball;
  Vec3 center{0, 0, 0};
  double radius = 1.0;  // ball
  Vec3 half{1, 1, 1};   // box half-widths

  static Region ball(const Vec3& c, double r) {
    require(r > 0.0, "ball radius must be positive");
    Region g;
    g.shape = Shape::ball;
    g.center = c;
    g.radius = r;
    return g;
  }
  static Region box(const Vec3& c, const Vec3& h) {
    require(h[0] > 0.0 && h[1] > 0.0 && h[2] > 0.0, "box half-widths must be positive");
    Region g;
    g.shape = Shape::box;
    g.center = c;
    g.half = h;
    return g;
  }

  bool contains(const Vec3& x) const {
    const Vec3 d = x - center;
    if (shape == Shape::ball) return norm(d) < radius;
    return std::abs(d[0]) < half[0] && std::abs(d[1]) < half[1] && std::abs(d[2]) < half[2];
  }

  /// Distance from an interior point to the complement (0 outside).
  double depth(const Vec3& x) const {
    if (!contains(x)) return 0.0;
    const Vec3 d = x - center;
    if (shape == Shape::ball) return radius - norm(d);
    return std::min({half[0] - std::abs(d[0]), half[1] - std::abs(d[1]), half[2] - std::abs(d[2])});
  }

  /// Distance from a point to the region (0 inside).
  double distance_to(const Vec3& x) const {
    const Vec3 d = x - center;
    if (shape == Shape::ball) return std::max(0.0, norm(d) - radius);
    Vec3 e;
    for (int k = 0; k < 3; ++k) e[k] = std::max(0.0, std::abs(d[k]) - half[k]);
    return norm(e);
  }

  /// Points on the boundary, for sampling min_{∂O} V.
  std::vector<Vec3> boundary_samples(int per_axis = 24) const {
    std::vector<Vec3> pts;
    if (shape == Shape::ball) {
      const int count = per_axis * per_axis;
      const double golden = pi * (3.0 - std::sqrt(5.0));
      for (int i = 0; i < count; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / count;
        const double r = std::sqrt(1.0 - z * z);
        const double t = golden * i;
        pts.push_back(center + radius * Vec3{r * std::cos(t), r * std::sin(t), z});
      }
    } else {
      for (int axis = 0; axis < 3; ++axis)
        for (int sgn : {-1, 1})
          for (int a = 0; a <= per_axis; ++a)
            for (int b = 0; b <= per_axis; ++b) {
              Vec3 p;
              const int u = (axis + 1) % 3, v = (axis + 2) % 3;
              p[axis] = center[axis] + sgn * half[axis];
              p[u] = center[u] + half[u] * (2.0 * a / per_axis - 1.0);
              p[v] = center[v] + half[v] * (2.0 * b / per_axis - 1.0);
              pts.push_back(p);
            }
    }
    return pts;
  }
};

/// dist(A, B) for two regions (0 if they overlap).
inline double region_distance(const Region& a, const Region& b) {
  using S = Region::Shape;
  if (a.shape == S::ball && b.shape == S::ball) return std::max(0.0, norm(a.center - b.center) - a.radius - b.radius);
  if (a.shape == S::box && b.shape == S::box) {
    Vec3 e;
    for (int k = 0; k < 3; ++k)
      e[k] = std::max(0.0, std::abs(a.center[k] - b.center[k]) - a.half[k] - b.half[k]);
    return norm(e);
  }
  const Region& ball = a.shape == S::ball ? a : b;
  const Region& box = a.shape == S::ball ? b : a;
  return std::max(0.0, box.distance_to(ball.center) - ball.radius);
}

enum class WellShape { quadratic, gaussian };

/// Radial contribution to V: strength·|x − c|² (quadratic) or
/// −strength·e^{−|x − c|²/width²} (gaussian). The declared region is O^i and
/// the center is the single point of 𝓜^i.
struct Well {
  Vec3 center{0, 0, 0};
  WellShape shape = WellShape::quadratic;
  double strength = 1.0;
  double width = 1.0;
  Region region;

  double value(const Vec3& x) const {
    const Vec3 d = x - center;
    const double r2 = dot(d, d);
    return shape == WellShape::quadratic ? strength * r2 : -strength * std::exp(-r2 / (width * width));
  }
};

/// A(x) = A0 + M x.
struct LinearVectorPotential {
  Vec3 A0{0, 0, 0};
  std::array<Vec3, 3> M{Vec3{0, 0, 0}, Vec3{0, 0, 0}, Vec3{0, 0, 0}};

  Vec3 operator()(const Vec3& x) const { return A0 + Vec3{dot(M[0], x), dot(M[1], x), dot(M[2], x)}; }
  Vec3 curl() const { return {M[2][1] - M[1][2], M[0][2] - M[2][0], M[1][0] - M[0][1]}; }
  double divergence() const { return M[0][0] + M[1][1] + M[2][2]; }

  /// Symmetric gauge A = ½ B × x for a uniform field B.
  static LinearVectorPotential uniform_field(const Vec3& B) {
    LinearVectorPotential a;
    a.M[0] = {0.0, -0.5 * B[2], 0.5 * B[1]};
    a.M[1] = {0.5 * B[2], 0.0, -0.5 * B[0]};
    a.M[2] = {-0.5 * B[1], 0.5 * B[0], 0.0};
    return a;
  }
  static LinearVectorPotential constant(const Vec3& A0) {
    LinearVectorPotential a;
    a.A0 = A0;
    return a;
  }
};

/// Electric and magnetic potentials with their wells, the penalization
/// parameters and the semiclassical parameter ε. V(x) = base + Σ wells.
struct PotentialSpec {
  double base = 1.0;
  std::vector<Well> wells;
  LinearVectorPotential A;
  std::vector<Vec3> zero_set;  // declared points of Z = {V = 0}
  double m_tilde = 0.5;
  double mu = 6.0;
  double beta = 0.5;
  double epsilon = 1.0;

  double V(const Vec3& x) const {
    double v = base;
    for (const Well& w : wells) v += w.value(x);
    return v;
  }
  /// m_i = V on 𝓜^i.
  double well_minimum(std::size_t i) const { return V(wells.at(i).center); }
  double min_well() const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < wells.size(); ++i) m = std::min(m, well_minimum(i));
    return m;
  }
  /// Sampled proxy for liminf_{|x|→∞} V: minimum over a far sphere.
  double far_field() const {
    double reach = 1.0;
    for (const Well& w : wells) reach = std::max(reach, norm(w.center) + w.width);
    const Region far = Region::ball({0, 0, 0}, 1e3 * reach);
    double m = std::numeric_limits<double>::infinity();
    for (const Vec3& p : far.boundary_samples(16)) m = std::min(m, V(p));
    return m;
  }
  /// δ = 1/10 min{dist(𝓜, ℝ³∖O), min_{i≠j} dist(O^i, O^j), dist(O, Z)}.
  double delta() const {
    double d = std::numeric_limits<double>::infinity();
    for (const Well& w : wells) d = std::min(d, w.region.depth(w.center));
    for (std::size_t i = 0; i < wells.size(); ++i)
      for (std::size_t j = i + 1; j < wells.size(); ++j) d = std::min(d, region_distance(wells[i].region, wells[j].region));
    for (const Vec3& z : zero_set)
      for (const Well& w : wells) d = std::min(d, w.region.distance_to(z));
    return 0.1 * d;
  }
  /// Scale factor ε^{−6/μ} of the penalization weight χ_ε.
  double chi_weight() const { return std::pow(epsilon, -6.0 / mu); }

  /// Index of the well whose region contains x (physical), or −1.
  int owning_well(const Vec3& x) const {
    for (std::size_t i = 0; i < wells.size(); ++i)
      if (wells[i].region.contains(x)) return static_cast<int>(i);
    return -1;
  }
};

/// Checks (V1), (V2), the choice of m̃ and 0 < β < δ; throws ConfigError.
inline void validate(const PotentialSpec& p) {
  require(!p.wells.empty(), "potential needs at least one well");
  require(p.epsilon > 0.0, "epsilon must be positive");
  require(p.mu > 0.0, "mu must be positive");
  for (std::size_t i = 0; i < p.wells.size(); ++i) {
    const Well& w = p.wells[i];
    require(w.strength > 0.0, "well strength must be positive");
    require(w.width > 0.0, "well width must be positive");
    require(w.region.contains(w.center), "well center must lie inside its region");
    const double mi = p.well_minimum(i);
    require(mi > 0.0, "well minimum m_i must be positive");
    // inf over O^i attained at the center: probe a lattice of the region.
    const double reach = w.region.shape == Region::Shape::ball ? w.region.radius
                                                               : std::max({w.region.half[0], w.region.half[1], w.region.half[2]});
    for (int a = -8; a <= 8; ++a)
      for (int b = -8; b <= 8; ++b)
        for (int c = -8; c <= 8; ++c) {
          const Vec3 x = w.region.center + (reach / 8.0) * Vec3{double(a), double(b), double(c)};
          if (w.region.contains(x))
            require(p.V(x) >= mi - 1e-12 * std::max(1.0, mi), "well center is not the minimizer of V on its region");
        }
    double boundary = std::numeric_limits<double>::infinity();
    for (const Vec3& b : w.region.boundary_samples()) boundary = std::min(boundary, p.V(b));
    require(mi < boundary, "V must exceed m_i on the boundary of well " + std::to_string(i));
  }
  for (std::size_t i = 0; i < p.wells.size(); ++i)
    for (std::size_t j = i + 1; j < p.wells.size(); ++j)
      require(region_distance(p.wells[i].region, p.wells[j].region) > 0.0, "well regions must be disjoint");
  const double far = p.far_field();
  require(far > 0.0, "V must stay positive at infinity");
  require(p.m_tilde > 0.0 && p.m_tilde < std::min(p.min_well(), far), "need 0 < m_tilde < min{m, liminf V}");
  const double d = p.delta();
  require(p.beta > 0.0 && p.beta < d, "need 0 < beta < delta = " + std::to_string(d));
}

// ---------------------------------------------------------------------------
// Sampled potentials on the scaled grid y (physical point x = εy).

inline RealField V_eps_field(const PotentialSpec& p, const Grid3& g) {
  return sample(g, [&](const Vec3& y) { return p.V(p.epsilon * y); });
}

inline RealField V_tilde_field(const PotentialSpec& p, const Grid3& g) {
  return sample(g, [&](const Vec3& y) { return std::max(p.m_tilde, p.V(p.epsilon * y)); });
}

inline VectorPotential A_eps_field(const PotentialSpec& p, const Grid3& g) {
  VectorPotential A = zero_potential(g);
  const long n = g.n();
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      for (long l = 0; l < n; ++l) {
        const Vec3 a = p.A(p.epsilon * g.point(i, j, l));
        for (int c = 0; c < 3; ++c) A[c].at(i, j, l) = a[c];
      }
  return A;
}

/// Indicator of y ∉ O_ε (well = −1 for the union O, else for O^well alone).
inline RealField outside_indicator(const PotentialSpec& p, const Grid3& g, int well = -1) {
  return sample(g, [&](const Vec3& y) {
    const Vec3 x = p.epsilon * y;
    const bool inside = well < 0 ? p.owning_well(x) >= 0 : p.wells.at(static_cast<std::size_t>(well)).region.contains(x);
    return inside ? 0.0 : 1.0;
  });
}

// ---------------------------------------------------------------------------
// Ansatz.

/// C² cutoff: 1 on [0, β], 0 beyond 2β, quintic smoothstep in between.
inline double cutoff(double r, double beta) {
  if (r <= beta) return 1.0;
  if (r >= 2.0 * beta) return 0.0;
  const double s = (r - beta) / beta;
  return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

struct Bump {
  int well = 0;              // index into PotentialSpec::wells
  Vec3 center{0, 0, 0};      // x_i, physical
  GroundState profile;       // U_i with multiplier m_i, maximum at the grid origin
  double phase = 0.0;        // w_i
};

using BumpSet = std::vector<Bump>;

namespace detail {

/// Whole-cell offset of the scaled center x/ε; it must be a grid node.
inline Index3 scaled_offset(const Grid3& g, const Vec3& x, double eps) {
  Index3 o;
  const double h = g.spacing();
  for (int d = 0; d < 3; ++d) {
    const double c = x[d] / eps;
    const double k = std::round(c / h);
    if (std::abs(k * h - c) > 1e-9 * h)
      throw ConfigError("scaled bump center x/eps is not a grid node (component " + std::to_string(d) + ")");
    o[d] = static_cast<long>(k);
  }
  return o;
}

}  // namespace detail

/// Checks the BumpSet invariants against the potential and the grid.
inline void validate(const BumpSet& bumps, const PotentialSpec& p, const Grid3& g) {
  require(!bumps.empty(), "bump set is empty");
  const double d = p.delta();
  const double eps = p.epsilon;
  const double L = g.half_width();
  const double support = 2.0 * p.beta / eps;
  for (std::size_t i = 0; i < bumps.size(); ++i) {
    const Bump& b = bumps[i];
    require(b.well >= 0 && static_cast<std::size_t>(b.well) < p.wells.size(), "bump refers to an unknown well");
    require(b.profile.U.grid() == g, "bump profile lives on a different grid");
    const double mi = p.well_minimum(static_cast<std::size_t>(b.well));
    require(std::abs(b.profile.a - mi) <= 1e-6 * mi, "bump profile multiplier must equal the well minimum m_i");
    require(norm(b.center - p.wells[static_cast<std::size_t>(b.well)].center) <= p.beta,
            "bump center must lie within beta of its minimizer set");
    detail::scaled_offset(g, b.center, eps);
    for (int c = 0; c < 3; ++c)
      if (std::abs(b.center[c] / eps) + support > L - g.spacing())
        throw ConfigError("bump cutoff support is clipped by the grid");
    for (std::size_t j = 0; j < i; ++j) {
      require(norm(b.center - bumps[j].center) > 2.0 * d, "bump centers must be separated by more than 2 delta");
      if (norm(b.center - bumps[j].center) / eps < 2.0 * support) throw ConfigError("bump supports overlap after scaling");
    }
  }
}

/// e^{i(w + A(x_i)·(y − x_i/ε))} φ(ε(y − x_i/ε)) U_i(y − x_i/ε) for one bump.
inline ComplexField bump_field(const Bump& b, const PotentialSpec& p, const Grid3& g) {
  const Index3 o = detail::scaled_offset(g, b.center, p.epsilon);
  const RealField U = shift_field(b.profile.U, o);
  const Vec3 c = (1.0 / p.epsilon) * b.center;
  const Vec3 a = p.A(b.center);
  ComplexField out(g);
  const long n = g.n();
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      for (long l = 0; l < n; ++l) {
        const Vec3 d = g.point(i, j, l) - c;
        const double phi = cutoff(p.epsilon * norm(d), p.beta);
        if (phi == 0.0) continue;
        out.at(i, j, l) = std::polar(phi * U.at(i, j, l), b.phase + dot(a, d));
      }
  return out;
}

/// U_ε^{x_1…x_k} = Σ_i bump_field(i).
inline ComplexField build_ansatz(const BumpSet& bumps, const PotentialSpec& p, const Grid3& g) {
  validate(bumps, p, g);
  ComplexField u(g);
  for (const Bump& b : bumps) u += bump_field(b, p, g);
  return u;
}

// ---------------------------------------------------------------------------
// Norms and functionals on the scaled grid.

/// Precomputed V_ε, Ṽ_ε, A_ε and the indicator of ℝ³∖O_ε for a grid.
struct ScaledPotential {
  PotentialSpec spec;
  RealField V, V_tilde, outside;
  VectorPotential A;

  ScaledPotential(const PotentialSpec& p, const Grid3& g)
      : spec(p), V(V_eps_field(p, g)), V_tilde(V_tilde_field(p, g)), outside(outside_indicator(p, g)), A(A_eps_field(p, g)) {}
  const Grid3& grid() const { return V.grid(); }
};

/// ‖u‖²_ε = ∫ |D^ε u|² + Ṽ_ε |u|².
inline double norm_eps_sq(const ComplexField& u, const ScaledPotential& sp) {
  double s = magnetic_kinetic(u, sp.A);
  double pot = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) pot += sp.V_tilde[i] * std::norm(u[i]);
  return s + pot * u.grid().cell_volume();
}

inline double norm_eps(const ComplexField& u, const ScaledPotential& sp) { return std::sqrt(norm_eps_sq(u, sp)); }

struct GammaReport {
  double F = 0.0;
  double Q = 0.0;
  std::vector<double> Q_per_well;
  double Gamma = 0.0;
  double outside_mass = 0.0;  // ∫_{ℝ³∖O_ε} |u|²
};

/// (c·m − 1)_+^{5/2}.
inline double penalty(double weighted_mass) {
  const double e = weighted_mass - 1.0;
  return e > 0.0 ? e * e * std::sqrt(e) : 0.0;
}

inline double outside_mass(const ComplexField& u, const RealField& indicator) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    if (indicator[i] != 0.0) s += std::norm(u[i]);
  return s * u.grid().cell_volume();
}

/// 𝓕_ε, Q_ε, Q^i_ε and Γ_ε = 𝓕_ε + Q_ε.
inline GammaReport gamma_eps(const ComplexField& u, const ScaledPotential& sp, const Kernel& kern) {
  GammaReport r;
  double pot = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) pot += sp.V[i] * std::norm(u[i]);
  pot *= u.grid().cell_volume();
  r.F = 0.5 * (magnetic_kinetic(u, sp.A) + pot) - 0.25 * dd(u, kern);
  const double w = sp.spec.chi_weight();
  r.outside_mass = outside_mass(u, sp.outside);
  r.Q = penalty(w * r.outside_mass);
  for (std::size_t i = 0; i < sp.spec.wells.size(); ++i)
    r.Q_per_well.push_back(penalty(w * outside_mass(u, outside_indicator(sp.spec, u.grid(), static_cast<int>(i)))));
  r.Gamma = r.F + r.Q;
  return r;
}

/// Σ_j D_j D_j u = (∇/i − A)² u; includes the i(div A)u term through the
/// spectral derivative of A_j u.
inline ComplexField magnetic_laplacian(const ComplexField& u, const VectorPotential& A) {
  const VectorField<cplx> D = magnetic_gradient(u, A);
  ComplexField out(u.grid());
  for (int j = 0; j < 3; ++j) {
    const ComplexField dj = derivative(D[j], j);
    for (std::size_t i = 0; i < u.size(); ++i) out[i] += cplx{0.0, -1.0} * dj[i] - A[j][i] * D[j][i];
  }
  return out;
}

/// r = (∇/i − A_ε)²u + V_ε u − (W ∗ |u|²)u; relative to ‖u‖_ε.
inline Residual magnetic_residual(const ComplexField& u, const ScaledPotential& sp, const Kernel& kern) {
  const RealField phi = hartree_potential(u, kern);
  Residual r;
  r.field = magnetic_laplacian(u, sp.A);
  for (std::size_t i = 0; i < u.size(); ++i) r.field[i] += (sp.V[i] - phi[i]) * u[i];
  r.norm = std::sqrt(l2_sq(r.field));
  const double ne = norm_eps(u, sp);
  r.relative = ne > 0.0 ? r.norm / ne : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Theorem diagnostics.

struct LocalMax {
  Index3 index{0, 0, 0};
  Vec3 y{0, 0, 0};       // scaled position
  double value = 0.0;    // |u|
  int well = -1;         // well whose region contains εy, or −1
  double dist_to_minimizer = std::numeric_limits<double>::quiet_NaN();  // dist(εy, 𝓜^well)
};

/// Strict 26-neighbour local maxima of |u| above 0.1·max|u|, in index order.
inline std::vector<LocalMax> local_maxima(const ComplexField& u, const PotentialSpec& p) {
  const Grid3& g = u.grid();
  const RealField m = modulus(u);
  const double top = sup_norm(m);
  std::vector<LocalMax> out;
  if (top == 0.0) return out;
  const long n = g.n();
  auto wrap = [n](long v) { return ((v % n) + n) % n; };
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      for (long l = 0; l < n; ++l) {
        const double v = m.at(i, j, l);
        if (v < 0.1 * top) continue;
        bool strict = true;
        for (int a = -1; a <= 1 && strict; ++a)
          for (int b = -1; b <= 1 && strict; ++b)
            for (int c = -1; c <= 1 && strict; ++c) {
              if (a == 0 && b == 0 && c == 0) continue;
              if (m.at(wrap(i + a), wrap(j + b), wrap(l + c)) >= v) strict = false;
            }
        if (!strict) continue;
        LocalMax lm;
        lm.index = {i, j, l};
        lm.y = g.point(i, j, l);
        lm.value = v;
        const Vec3 x = p.epsilon * lm.y;
        lm.well = p.owning_well(x);
        if (lm.well >= 0) lm.dist_to_minimizer = norm(x - p.wells[static_cast<std::size_t>(lm.well)].center);
        out.push_back(lm);
      }
  return out;
}

struct RemainderReport {
  double norm = 0.0;            // ‖K‖_ε
  std::vector<double> phases;   // fitted w_i
  ComplexField K;
};

/// K = u − Σ e^{iw_i} (bump i with phase 0), with w_i = arg⟨u, bump_i⟩, the
/// exact per-bump optimum because the cutoff supports are disjoint.
inline RemainderReport decomposition_remainder(const ComplexField& u, BumpSet bumps, const ScaledPotential& sp) {
  const Grid3& g = u.grid();
  validate(bumps, sp.spec, g);
  RemainderReport r;
  r.K = u;
  for (Bump& b : bumps) {
    b.phase = 0.0;
    ComplexField f = bump_field(b, sp.spec, g);
    const cplx c = inner(u, f);
    double w = std::abs(c) > 0.0 ? std::arg(c) : 0.0;
    if (w < 0.0) w += 2.0 * pi;
    f *= std::polar(1.0, w);
    r.K -= f;
    r.phases.push_back(w);
  }
  r.norm = norm_eps(r.K, sp);
  return r;
}

/// Bumps centred at the given maxima (scaled grid nodes), matched to wells
/// by ownership; errors when the count or ownership does not match.
inline BumpSet bumps_at_maxima(const std::vector<LocalMax>& maxima, const BumpSet& templ, const PotentialSpec& p) {
  if (maxima.size() != templ.size())
    throw NumericalError("found " + std::to_string(maxima.size()) + " local maxima for " + std::to_string(templ.size()) +
                         " bumps");
  BumpSet out = templ;
  for (Bump& b : out) {
    const LocalMax* hit = nullptr;
    for (const LocalMax& m : maxima)
      if (m.well == b.well) hit = &m;
    if (!hit) throw NumericalError("no local maximum inside well " + std::to_string(b.well));
    b.center = p.epsilon * hit->y;
  }
  return out;
}

struct EnvelopeCheck {
  double C1 = 0.0;
  double C2 = 0.0;
  double ratio = 0.0;       // max over the shell of |u| / (C1 e^{−C2 d})
  double elasticity = 0.0;  // of the binned upper envelope
  std::size_t samples = 0;
  bool pass = false;
};

/// Fits |u(y)| ≤ C1 e^{−C2 d(y)}, d = min_i |y − c_i|, on the shell
/// |u| ∈ [1e−8, 1e−2]·max. The fit uses the largest log|u| in each distance
/// bin of width h (the upper envelope). A least-squares line gives (C1, C2);
/// when the envelope is concave in d the line is fitted to the first decade
/// of the shell only. It passes when C2 > 0, the envelope bounds |u| up to a
/// factor 1.5 and the decay does not flatten algebraically (elasticity of the
/// log-slope above −0.5).
inline EnvelopeCheck decay_envelope_check(const ComplexField& u, const std::vector<Vec3>& centers) {
  require(!centers.empty(), "need at least one center");
  const Grid3& g = u.grid();
  const double top = sup_norm(u);
  if (!(top > 0.0)) throw NumericalError("decay envelope: insufficient dynamic range (zero field)");
  const double h = g.spacing();
  const long n = g.n();
  std::vector<double> ds, ls;
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      for (long l = 0; l < n; ++l) {
        const double v = std::abs(u.at(i, j, l));
        if (v < 1e-8 * top || v > 1e-2 * top) continue;
        const Vec3 y = g.point(i, j, l);
        double d = std::numeric_limits<double>::infinity();
        for (const Vec3& c : centers) d = std::min(d, norm(y - c));
        ds.push_back(d);
        ls.push_back(std::log(v));
      }
  if (ds.size() < 10) throw NumericalError("decay envelope: insufficient dynamic range");
  const double dmin = *std::min_element(ds.begin(), ds.end());
  const double dmax = *std::max_element(ds.begin(), ds.end());
  // Bins of width h, refined when the whole shell is a thin layer.
  const double bw = std::min(h, (dmax - dmin) / 16.0);
  if (!(bw > 0.0)) throw NumericalError("decay envelope: shell has no radial extent");
  const auto bins = static_cast<std::size_t>(std::floor((dmax - dmin) / bw)) + 1;
  std::vector<double> best(bins, -std::numeric_limits<double>::infinity());
  std::vector<double> where(bins, 0.0);
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const auto b = std::min(bins - 1, static_cast<std::size_t>((ds[k] - dmin) / bw));
    if (ls[k] > best[b]) {
      best[b] = ls[k];
      where[b] = ds[k];
    }
  }
  std::vector<double> xs, ys;
  for (std::size_t b = 0; b < bins; ++b)
    if (std::isfinite(best[b])) {
      xs.push_back(where[b]);
      ys.push_back(best[b]);
    }
  if (xs.size() < 4) throw NumericalError("decay envelope: shell too thin for a fit");
  double xbar = 0.0;
  for (double x : xs) xbar += x;
  xbar /= static_cast<double>(xs.size());
  double S[5] = {0, 0, 0, 0, 0}, T[3] = {0, 0, 0};
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double s = xs[k] - xbar;
    double pw = 1.0;
    for (int e = 0; e < 5; ++e) {
      S[e] += pw;
      if (e < 3) T[e] += pw * ys[k];
      pw *= s;
    }
  }
  EnvelopeCheck r;
  r.samples = ds.size();
  const double det2 = S[0] * S[2] - S[1] * S[1];
  const double c1 = (S[0] * T[1] - S[1] * T[0]) / det2;
  const double c0 = (T[0] - c1 * S[1]) / S[0];
  // Quadratic fit of the envelope for the curvature statistic.
  const double A3[3][3] = {{S[0], S[1], S[2]}, {S[1], S[2], S[3]}, {S[2], S[3], S[4]}};
  auto det3 = [](const double M[3][3]) {
    return M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1]) - M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0]) +
           M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0]);
  };
  const double dA = det3(A3);
  double q[3] = {0, 0, 0};
  for (int c = 0; c < 3; ++c) {
    double M[3][3];
    for (int rr = 0; rr < 3; ++rr)
      for (int cc = 0; cc < 3; ++cc) M[rr][cc] = cc == c ? T[rr] : A3[rr][cc];
    q[c] = det3(M) / dA;
  }
  const double smid = 0.5 * (xs.front() + xs.back()) - xbar;
  const double slope = q[1] + 2.0 * q[2] * smid;
  r.elasticity = slope != 0.0 ? 2.0 * q[2] * (smid + xbar) / slope : std::numeric_limits<double>::infinity();
  r.C2 = -c1;
  r.C1 = std::exp(c0 + r.C2 * xbar);
  if (q[2] < 0.0) {
    // Decay accelerates across the shell, so the rate over its first decade
    // gives an exponential that still bounds the rest.
    const double cut = std::log(1e-3 * top);
    double n0 = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t b = 0; b < xs.size(); ++b)
      if (ys[b] >= cut) {
        n0 += 1;
        sx += xs[b];
        sy += ys[b];
        sxx += xs[b] * xs[b];
        sxy += xs[b] * ys[b];
      }
    const double den = n0 * sxx - sx * sx;
    if (n0 >= 3 && den > 0.0) {
      const double m = (n0 * sxy - sx * sy) / den;
      r.C2 = -m;
      r.C1 = std::exp((sy - m * sx) / n0);
    }
  }
  for (std::size_t k = 0; k < ds.size(); ++k) r.ratio = std::max(r.ratio, std::exp(ls[k]) / (r.C1 * std::exp(-r.C2 * ds[k])));
  r.pass = r.C2 > 0.0 && r.ratio <= 1.5 && r.elasticity > -0.5;
  return r;
}

// ---------------------------------------------------------------------------
// Relaxation: projected descent on Γ_ε keeping the mass near each bump.

struct RelaxParams {
  int steps = 50;
  double tau = 1.0;  // preconditioned step fraction
  double shift = 0.0;  // preconditioner (shift − Δ)^{-1}; 0 = max well minimum
};

struct RelaxResult {
  ComplexField u;
  std::vector<double> gamma;  // Γ_ε after each accepted step, initial first
  int rejected = 0;
};

/// Fixed-budget descent on Γ_ε. Space is split between the bumps by nearest
/// scaled center and the mass in each cell is held at the mass ρ_i of that
/// bump's limiting profile (the cutoff ansatz itself carries less), so bumps
/// cannot trade mass. The step is u − τ(s − Δ)^{-1}(Γ'_ε(u) − λ_c u)
/// with λ_c the Lagrange multiplier of cell c; a step that raises Γ_ε is
/// retried with τ halved.
inline RelaxResult relax(const ComplexField& u0, const BumpSet& bumps, const ScaledPotential& sp, const Kernel& kern,
                         const RelaxParams& rp = {}) {
  require(rp.steps >= 0 && rp.tau > 0.0, "relaxation needs steps >= 0 and tau > 0");
  const Grid3& g = u0.grid();
  const PotentialSpec& p = sp.spec;
  std::vector<Vec3> centers;
  for (const Bump& b : bumps) centers.push_back((1.0 / p.epsilon) * b.center);
  std::vector<int> cell(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Index3 ix = g.unravel(i);
    const Vec3 y = g.point(ix[0], ix[1], ix[2]);
    int best = 0;
    for (std::size_t c = 1; c < centers.size(); ++c)
      if (norm(y - centers[c]) < norm(y - centers[static_cast<std::size_t>(best)])) best = static_cast<int>(c);
    cell[i] = best;
  }
  const std::size_t k = centers.size();
  auto cell_masses = [&](const ComplexField& u) {
    std::vector<double> m(k, 0.0);
    for (std::size_t i = 0; i < u.size(); ++i) m[static_cast<std::size_t>(cell[i])] += std::norm(u[i]);
    for (double& v : m) v *= g.cell_volume();
    return m;
  };
  std::vector<double> target(k);
  for (std::size_t c = 0; c < k; ++c) target[c] = bumps[c].profile.rho;
  auto project = [&](ComplexField& u) {
    const std::vector<double> m = cell_masses(u);
    for (std::size_t c = 0; c < k; ++c)
      if (!(m[c] > 0.0)) throw NumericalError("relaxation emptied a bump cell");
    for (std::size_t i = 0; i < u.size(); ++i) {
      const auto c = static_cast<std::size_t>(cell[i]);
      u[i] *= std::sqrt(target[c] / m[c]);
    }
  };
  double s = rp.shift;
  if (s <= 0.0) {
    for (const Bump& b : bumps) s = std::max(s, p.well_minimum(static_cast<std::size_t>(b.well)));
  }
  const double w = p.chi_weight();

  RelaxResult out;
  out.u = u0;
  project(out.u);
  out.gamma.push_back(gamma_eps(out.u, sp, kern).Gamma);
  double tau = rp.tau;
  int accepted = 0, attempts = 0;
  while (accepted < rp.steps) {
    if (++attempts > 20 * std::max(rp.steps, 1)) throw NumericalError("relaxation could not decrease Gamma_eps");
    const ComplexField& u = out.u;
    const RealField phi = hartree_potential(u, kern);
    ComplexField grad = magnetic_laplacian(u, sp.A);
    const double excess = w * outside_mass(u, sp.outside) - 1.0;
    const double qfac = excess > 0.0 ? 5.0 * std::pow(excess, 1.5) * w : 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) grad[i] += (sp.V[i] - phi[i] + qfac * sp.outside[i]) * u[i];
    std::vector<double> num(k, 0.0);
    for (std::size_t i = 0; i < u.size(); ++i)
      num[static_cast<std::size_t>(cell[i])] += std::real(grad[i] * std::conj(u[i]));
    std::vector<double> lam(k);
    for (std::size_t c = 0; c < k; ++c) lam[c] = num[c] * g.cell_volume() / target[c];
    for (std::size_t i = 0; i < u.size(); ++i) grad[i] -= lam[static_cast<std::size_t>(cell[i])] * u[i];
    ComplexField dir = screened_inverse(grad, s);
    ComplexField trial = u;
    for (std::size_t i = 0; i < u.size(); ++i) trial[i] -= tau * dir[i];
    project(trial);
    const double gt = gamma_eps(trial, sp, kern).Gamma;
    if (!(gt <= out.gamma.back())) {
      tau *= 0.5;
      ++out.rejected;
      if (tau < 1e-8 * rp.tau) break;  // stationary to rounding
      continue;
    }
    out.u = std::move(trial);
    out.gamma.push_back(gt);
    ++accepted;
  }
  return out;
}

/// Γ_ε along the single-bump scale path W_{ε,t}(y) = e^{iA(x_i)(y − c)} φ_ε(y − c) U_i((y − c)/t).
inline double bump_path_energy(const Bump& b, const ScaledPotential& sp, const Kernel& kern, double t) {
  require(t > 0.0, "path parameter must be positive");
  Bump scaled = b;
  if (t != 1.0) {
    if (1.0 / t < 1.0 && mass_outside(b.profile.U, 1.0 / t) > 1e-6)
      throw ConfigError("dilated bump profile does not fit the grid at t = " + std::to_string(t));
    scaled.profile.U = dilate(b.profile.U, 1.0 / t);
  }
  return gamma_eps(bump_field(scaled, sp.spec, sp.grid()), sp, kern).Gamma;
}

}  // namespace choquard
