#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "choquard/grid.hpp"

namespace choquard {

/// k point particles: positions, velocities and masses.
struct NewtonState {
  std::vector<Vec3> x;
  std::vector<Vec3> xi;
  std::vector<double> m;
  double t = 0.0;

  std::size_t size() const { return x.size(); }
};

inline void validate(const NewtonState& s) {
  require(!s.x.empty(), "need at least one particle");
  require(s.xi.size() == s.x.size() && s.m.size() == s.x.size(), "positions, velocities and masses differ in count");
  for (std::size_t j = 0; j < s.size(); ++j) {
    require(s.m[j] > 0.0, "particle masses must be positive");
    for (int d = 0; d < 3; ++d)
      require(std::isfinite(s.x[j][d]) && std::isfinite(s.xi[j][d]), "particle state must be finite");
  }
}

struct ForceField {
  std::function<double(const Vec3&)> V = [](const Vec3&) { return 0.0; };
  std::function<Vec3(const Vec3&)> gradV = [](const Vec3&) { return Vec3{0, 0, 0}; };
  std::function<double(const Vec3&)> W = [](const Vec3& x) { return 1.0 / norm(x); };
  std::function<Vec3(const Vec3&)> gradW = [](const Vec3& x) {
    const double r = norm(x);
    return (-1.0 / (r * r * r)) * x;
  };
  std::function<Vec3(const Vec3&)> B = [](const Vec3&) { return Vec3{0, 0, 0}; };
  double eps = 0.0;
  bool singular_W = true;  // W blows up at the origin (Coulomb-type)
};

/// V(x) = c + ½ (x − x0)ᵀ H (x − x0) with symmetric H.
inline void set_quadratic_potential(ForceField& f, const std::array<Vec3, 3>& H, const Vec3& x0, double c = 0.0) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      require(std::abs(H[i][j] - H[j][i]) <= 1e-14 * (std::abs(H[i][j]) + 1.0), "quadratic potential needs a symmetric matrix");
  f.V = [H, x0, c](const Vec3& x) {
    const Vec3 d = x - x0;
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += d[i] * dot(H[i], d);
    return c + 0.5 * s;
  };
  f.gradV = [H, x0](const Vec3& x) {
    const Vec3 d = x - x0;
    return Vec3{dot(H[0], d), dot(H[1], d), dot(H[2], d)};
  };
}

inline void set_uniform_field(ForceField& f, const Vec3& b) {
  f.B = [b](const Vec3&) { return b; };
}

struct NewtonRate {
  std::vector<Vec3> dx;
  std::vector<Vec3> dxi;
};

inline double min_pair_distance(const NewtonState& s) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) best = std::min(best, norm(s.x[i] - s.x[j]));
  return best;
}

/// ẋ_j = ξ_j,  ξ̇_j = −∇V(x_j) − ε Σ_{i≠j} m_i ∇W(x_j − x_i) − ξ_j × B(x_j).
inline NewtonRate rhs(const NewtonState& s, const ForceField& f) {
  const std::size_t k = s.size();
  NewtonRate r;
  r.dx = s.xi;
  r.dxi.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    Vec3 a = -1.0 * f.gradV(s.x[j]);
    if (f.eps != 0.0)
      for (std::size_t i = 0; i < k; ++i) {
        if (i == j) continue;
        const Vec3 d = s.x[j] - s.x[i];
        if (f.singular_W && norm(d) < 1e-12) throw NumericalError("coincident particles with a singular interaction");
        a = a - (f.eps * s.m[i]) * f.gradW(d);
      }
    a = a - cross(s.xi[j], f.B(s.x[j]));
    r.dxi[j] = a;
  }
  return r;
}

/// Σ m_j|ξ_j|²/2 + Σ m_j V(x_j) + (ε/2) Σ_{i≠j} m_i m_j W(x_i − x_j).
inline double newton_energy(const NewtonState& s, const ForceField& f) {
  double h = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) h += s.m[j] * (0.5 * dot(s.xi[j], s.xi[j]) + f.V(s.x[j]));
  if (f.eps != 0.0)
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = 0; j < s.size(); ++j)
        if (i != j) h += 0.5 * f.eps * s.m[i] * s.m[j] * f.W(s.x[i] - s.x[j]);
  return h;
}

inline Vec3 total_momentum(const NewtonState& s) {
  Vec3 p{0, 0, 0};
  for (std::size_t j = 0; j < s.size(); ++j) p = p + s.m[j] * s.xi[j];
  return p;
}

/// Power of the Lorentz term in d/dt Σ m|ξ|²/2, i.e. −Σ m_j ⟨ξ_j, ξ_j × B⟩.
inline double magnetic_power(const NewtonState& s, const ForceField& f) {
  double p = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) p -= s.m[j] * dot(s.xi[j], cross(s.xi[j], f.B(s.x[j])));
  return p;
}

namespace detail {
inline NewtonState advance(const NewtonState& s, const NewtonRate& r, double h) {
  NewtonState o = s;
  for (std::size_t j = 0; j < s.size(); ++j) {
    o.x[j] = s.x[j] + h * r.dx[j];
    o.xi[j] = s.xi[j] + h * r.dxi[j];
  }
  return o;
}
}  // namespace detail

/// One classical RK4 step.
inline NewtonState rk4_step(const NewtonState& s, const ForceField& f, double h) {
  const NewtonRate k1 = rhs(s, f);
  const NewtonRate k2 = rhs(detail::advance(s, k1, 0.5 * h), f);
  const NewtonRate k3 = rhs(detail::advance(s, k2, 0.5 * h), f);
  const NewtonRate k4 = rhs(detail::advance(s, k3, h), f);
  NewtonState o = s;
  for (std::size_t j = 0; j < s.size(); ++j) {
    o.x[j] = s.x[j] + (h / 6.0) * (k1.dx[j] + 2.0 * k2.dx[j] + 2.0 * k3.dx[j] + k4.dx[j]);
    o.xi[j] = s.xi[j] + (h / 6.0) * (k1.dxi[j] + 2.0 * k2.dxi[j] + 2.0 * k3.dxi[j] + k4.dxi[j]);
  }
  o.t = s.t + h;
  return o;
}

struct TrajectorySample {
  NewtonState state;
  double H = 0.0;
  double min_pair = std::numeric_limits<double>::infinity();
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  double max_energy_drift = 0.0;  // max |H(t) − H(0)| / max(|H(0)|, 1)
  const NewtonState& final_state() const { return samples.back().state; }
};

struct IntegrateOptions {
  int stride = 1;
  double min_distance = 1e-6;  // abort when two particles get closer
};

/// RK4 from state0 to time T with step dt (T must be a multiple of dt).
inline Trajectory integrate(const NewtonState& state0, const ForceField& f, double T, double dt,
                            const IntegrateOptions& opt = {}) {
  validate(state0);
  require(T >= 0.0 && dt > 0.0, "integrate needs T >= 0 and dt > 0");
  require(opt.stride > 0, "sample stride must be positive");
  const long steps = std::lround(T / dt);
  require(std::abs(static_cast<double>(steps) * dt - T) <= 1e-9 * std::max(1.0, T), "T must be a multiple of dt");
  Trajectory tr;
  const double H0 = newton_energy(state0, f);
  const double scale = std::max(std::abs(H0), 1.0);
  auto record = [&](const NewtonState& s) {
    TrajectorySample smp{s, newton_energy(s, f), min_pair_distance(s)};
    tr.max_energy_drift = std::max(tr.max_energy_drift, std::abs(smp.H - H0) / scale);
    tr.samples.push_back(std::move(smp));
  };
  NewtonState s = state0;
  record(s);
  for (long k = 1; k <= steps; ++k) {
    s = rk4_step(s, f, dt);
    s.t = state0.t + static_cast<double>(k) * dt;
    if (f.eps != 0.0 && f.singular_W && s.size() > 1) {
      const double dmin = min_pair_distance(s);
      if (dmin < opt.min_distance)
        throw NumericalError("particles approached within " + std::to_string(dmin) + " at t = " + std::to_string(s.t));
    }
    for (std::size_t j = 0; j < s.size(); ++j)
      for (int d = 0; d < 3; ++d)
        if (!std::isfinite(s.x[j][d]) || !std::isfinite(s.xi[j][d]))
          throw NumericalError("trajectory became non-finite at t = " + std::to_string(s.t));
    if (k % opt.stride == 0 || k == steps) record(s);
  }
  return tr;
}

/// Times at which component `comp` of particle j's velocity crosses zero
/// upwards, located by cubic Hermite interpolation between RK4 steps.
inline std::vector<double> upward_crossings(const NewtonState& state0, const ForceField& f, double T, double dt,
                                            std::size_t j, int comp) {
  validate(state0);
  require(j < state0.size() && comp >= 0 && comp < 3, "particle or component out of range");
  std::vector<double> times;
  NewtonState s = state0;
  NewtonRate r = rhs(s, f);
  const long steps = std::lround(T / dt);
  for (long k = 0; k < steps; ++k) {
    NewtonState n = rk4_step(s, f, dt);
    NewtonRate rn = rhs(n, f);
    const double y0 = s.xi[j][comp], y1 = n.xi[j][comp];
    if (y0 < 0.0 && y1 >= 0.0) {
      const double d0 = r.dxi[j][comp] * dt, d1 = rn.dxi[j][comp] * dt;
      auto hermite = [&](double u) {
        const double u2 = u * u, u3 = u2 * u;
        return (2 * u3 - 3 * u2 + 1) * y0 + (u3 - 2 * u2 + u) * d0 + (-2 * u3 + 3 * u2) * y1 + (u3 - u2) * d1;
      };
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (hermite(mid) < 0.0 ? lo : hi) = mid;
      }
      times.push_back(s.t + 0.5 * (lo + hi) * dt);
    }
    s = std::move(n);
    r = std::move(rn);
  }
  return times;
}

enum class Stationarity { bounded, unbounded };

struct StationaryReport {
  Stationarity kind = Stationarity::bounded;
  double gradient_norm = 0.0;
  double amplification = 0.0;  // max over probes and time of |x(t) − x0| / η
};

/// Checks that `point` is a critical point of V and probes the linear
/// stability by integrating one particle from point + η e_d (d = 1..3, at
/// rest) over [0, T]. Drift beyond `threshold`·η counts as unbounded.
inline StationaryReport stationary_spectrum(const ForceField& f, const Vec3& point, double T = 20.0, double dt = 1e-2,
                                            double eta = 1e-8, double threshold = 100.0) {
  StationaryReport rep;
  rep.gradient_norm = norm(f.gradV(point));
  if (!(rep.gradient_norm < 1e-10))
    throw ConfigError("point is not a critical point of V (|grad V| = " + std::to_string(rep.gradient_norm) + ")");
  ForceField single = f;
  single.eps = 0.0;
  for (int d = 0; d < 3; ++d) {
    NewtonState s;
    Vec3 x = point;
    x[d] += eta;
    s.x = {x};
    s.xi = {Vec3{0, 0, 0}};
    s.m = {1.0};
    const Trajectory tr = integrate(s, single, T, dt);
    for (const auto& smp : tr.samples)
      rep.amplification = std::max(rep.amplification, norm(smp.state.x[0] - point) / eta);
  }
  rep.kind = rep.amplification > threshold ? Stationarity::unbounded : Stationarity::bounded;
  return rep;
}

}  // namespace choquard
