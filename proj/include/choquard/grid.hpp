#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <fftw3.h>

#include "choquard/error.hpp"

namespace choquard {

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;
using Index3 = std::array<long, 3>;

inline constexpr double pi = std::numbers::pi;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

/// Allocator handing out FFTW-aligned storage so field buffers can be
/// transformed in place with new-array plan execution.
template <class T>
struct FftwAllocator {
  using value_type = T;
  FftwAllocator() = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) {
    void* p = fftw_malloc(n * sizeof(T));
    if (p == nullptr) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }
  template <class U>
  bool operator==(const FftwAllocator<U>&) const noexcept { return true; }
};

template <class T>
using AlignedVector = std::vector<T, FftwAllocator<T>>;

/// Cubic periodic domain [-L, L)^3 with n points per axis.
class Grid3 {
 public:
  Grid3() = default;

  int n() const { return n_; }
  double half_width() const { return L_; }
  double spacing() const { return 2.0 * L_ / n_; }
  double cell_volume() const { double h = spacing(); return h * h * h; }
  std::size_t size() const { return static_cast<std::size_t>(n_) * n_ * n_; }

  /// Physical coordinate of index i along any axis; i = n/2 is the origin.
  double coord(long i) const { return -L_ + static_cast<double>(i) * spacing(); }
  Vec3 point(long i, long j, long l) const { return {coord(i), coord(j), coord(l)}; }

  /// Signed FFT-order mode number of index j.
  long mode(long j) const { return j < n_ / 2 ? j : j - n_; }
  double wavenumber(long j) const { return pi * static_cast<double>(mode(j)) / L_; }
  bool is_nyquist(long j) const { return j == n_ / 2; }

  std::size_t index(long i, long j, long l) const {
    return (static_cast<std::size_t>(i) * n_ + static_cast<std::size_t>(j)) * n_ + static_cast<std::size_t>(l);
  }
  Index3 unravel(std::size_t idx) const {
    const auto nn = static_cast<std::size_t>(n_);
    return {static_cast<long>(idx / (nn * nn)), static_cast<long>((idx / nn) % nn), static_cast<long>(idx % nn)};
  }

  friend bool operator==(const Grid3& a, const Grid3& b) { return a.n_ == b.n_ && a.L_ == b.L_; }

  friend Grid3 make_grid(int n, double L);

 private:
  int n_ = 0;
  double L_ = 0.0;
};

/// True for n = 2^a or 3·2^a (a ≥ 1), the sizes FFTW handles with radix-2/3
/// codelets and that keep a Nyquist mode.
inline bool fft_friendly(int n) {
  if (n % 3 == 0) n /= 3;
  return n >= 2 && (n & (n - 1)) == 0;
}

inline Grid3 make_grid(int n, double L) {
  require(n >= 8 && fft_friendly(n), "grid size must be 2^a or 3*2^a and >= 8, got " + std::to_string(n));
  require(L > 0.0 && std::isfinite(L), "grid half-width must be positive");
  Grid3 g;
  g.n_ = n;
  g.L_ = L;
  return g;
}

inline void require_same_grid(const Grid3& a, const Grid3& b) {
  require(a == b, "fields live on different grids");
}

/// Sampled scalar field on a Grid3, row-major with z fastest.
template <class T>
class Field {
 public:
  using value_type = T;

  Field() = default;
  explicit Field(const Grid3& g) : grid_(g), values_(g.size(), T{}) {}
  Field(const Grid3& g, AlignedVector<T> values) : grid_(g), values_(std::move(values)) {
    require(values_.size() == g.size(), "field value count does not match grid");
  }

  const Grid3& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }
  T& at(long i, long j, long l) { return values_[grid_.index(i, j, l)]; }
  const T& at(long i, long j, long l) const { return values_[grid_.index(i, j, l)]; }

  bool all_finite() const {
    for (const T& v : values_) {
      if constexpr (std::is_same_v<T, cplx>) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
      } else {
        if (!std::isfinite(v)) return false;
      }
    }
    return true;
  }

  Field& operator+=(const Field& o) {
    require_same_grid(grid_, o.grid_);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    require_same_grid(grid_, o.grid_);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  template <class S>
  Field& operator*=(S s) {
    for (auto& v : values_) v *= s;
    return *this;
  }

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  template <class S>
  friend Field operator*(S s, Field a) { return a *= s; }

 private:
  Grid3 grid_;
  AlignedVector<T> values_;
};

using RealField = Field<double>;
using ComplexField = Field<cplx>;

/// Samples f(x) at every grid node.
template <class T = double, class F>
Field<T> sample(const Grid3& g, F&& f) {
  Field<T> out(g);
  const long n = g.n();
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      for (long l = 0; l < n; ++l) out.at(i, j, l) = static_cast<T>(f(g.point(i, j, l)));
  return out;
}

inline ComplexField to_complex(const RealField& r) {
  ComplexField c(r.grid());
  for (std::size_t i = 0; i < r.size(); ++i) c[i] = r[i];
  return c;
}

inline RealField real_part(const ComplexField& c) {
  RealField r(c.grid());
  for (std::size_t i = 0; i < c.size(); ++i) r[i] = c[i].real();
  return r;
}

inline RealField modulus(const ComplexField& c) {
  RealField r(c.grid());
  for (std::size_t i = 0; i < c.size(); ++i) r[i] = std::abs(c[i]);
  return r;
}

inline RealField density(const ComplexField& c) {
  RealField r(c.grid());
  for (std::size_t i = 0; i < c.size(); ++i) r[i] = std::norm(c[i]);
  return r;
}

/// Three components of a vector-valued field (gradient, vector potential).
template <class T>
using VectorField = std::array<Field<T>, 3>;

}  // namespace choquard
