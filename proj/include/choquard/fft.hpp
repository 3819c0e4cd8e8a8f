#pragma once

#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include <fftw3.h>

#include "choquard/grid.hpp"

namespace choquard::fft {

/// FFTW's planner is not reentrant; every plan creation and destruction goes
/// through this lock. Execution of an existing plan on new arrays is safe.
inline std::mutex& planner_mutex() {
  // Leaked so cached plans can still be destroyed during static teardown.
  static auto* m = new std::mutex;
  return *m;
}

/// Worker count: CHOQUARD_THREADS when set, otherwise 1.
inline int thread_count() {
  if (const char* env = std::getenv("CHOQUARD_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  return 1;
}

namespace detail {
inline void init_threads_locked() {
  static bool done = false;
  if (done) return;
  done = true;
  const int t = thread_count();
  if (t > 1 && fftw_init_threads() != 0) fftw_plan_with_nthreads(t);
}
}  // namespace detail

/// Owning handle for an fftw_plan.
class Plan {
 public:
  Plan() = default;
  explicit Plan(fftw_plan p) : p_(p) {}
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  Plan(Plan&& o) noexcept : p_(std::exchange(o.p_, nullptr)) {}
  Plan& operator=(Plan&& o) noexcept {
    if (this != &o) {
      reset();
      p_ = std::exchange(o.p_, nullptr);
    }
    return *this;
  }
  ~Plan() { reset(); }

  fftw_plan get() const { return p_; }
  explicit operator bool() const { return p_ != nullptr; }

 private:
  void reset() {
    if (p_ != nullptr) {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(p_);
      p_ = nullptr;
    }
  }
  fftw_plan p_ = nullptr;
};

/// Builds a plan under the planner lock. FFTW_ESTIMATE keeps plan selection
/// deterministic, so serial reruns are bit-identical.
template <class F>
Plan make_plan(F&& build) {
  std::lock_guard lock(planner_mutex());
  detail::init_threads_locked();
  fftw_plan p = build();
  if (p == nullptr) throw NumericalError("FFTW failed to create a plan");
  return Plan(p);
}

inline fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

/// In-place 3D complex transforms of n^3 arrays, cached per size.
class Cube {
 public:
  explicit Cube(int n) : n_(n) {
    AlignedVector<cplx> scratch(static_cast<std::size_t>(n) * n * n);
    auto* s = as_fftw(scratch.data());
    forward_ = make_plan([&] { return fftw_plan_dft_3d(n, n, n, s, s, FFTW_FORWARD, FFTW_ESTIMATE); });
    backward_ = make_plan([&] { return fftw_plan_dft_3d(n, n, n, s, s, FFTW_BACKWARD, FFTW_ESTIMATE); });
  }

  /// Unnormalized forward transform.
  void forward(cplx* data) const { fftw_execute_dft(forward_.get(), as_fftw(data), as_fftw(data)); }
  /// Unnormalized backward transform (caller divides by n^3).
  void backward(cplx* data) const { fftw_execute_dft(backward_.get(), as_fftw(data), as_fftw(data)); }

  int n() const { return n_; }

 private:
  int n_;
  Plan forward_;
  Plan backward_;
};

inline const Cube& cube(int n) {
  static std::mutex m;
  static std::map<int, std::unique_ptr<Cube>> cache;
  std::lock_guard lock(m);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<Cube>(n);
  return *slot;
}

}  // namespace choquard::fft
