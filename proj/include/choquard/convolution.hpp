#pragma once

#include <cstring>
#include <map>
#include <memory>
#include <mutex>

#include "choquard/fft.hpp"
#include "choquard/grid.hpp"
#include "choquard/kernel.hpp"

namespace choquard {

namespace detail {

/// Zero-padded transforms between an n^3 real array and the half-complex
/// spectrum of its (2n)^3 padding. Each axis is transformed separately so the
/// padded zeros are never fed through the FFT, and on the way back only the
/// lines that reach the original n^3 block are computed.
class PaddedTransform {
 public:
  explicit PaddedTransform(int n) : n_(n), m_(2 * n), mh_(n + 1) {
    AlignedVector<double> r(real_size());
    AlignedVector<cplx> c(spectrum_size());
    double* rp = r.data();
    fftw_complex* cp = fft::as_fftw(c.data());
    const int line = m_ * mh_;  // stride between x-planes in the spectrum

    fftw_iodim z_dim{m_, 1, 1};
    fftw_iodim z_many[2] = {{n_, n_ * m_, line}, {n_, m_, mh_}};
    z_fwd_ = fft::make_plan([&] { return fftw_plan_guru_dft_r2c(1, &z_dim, 2, z_many, rp, cp, FFTW_ESTIMATE); });
    fftw_iodim z_many_back[2] = {{n_, line, n_ * m_}, {n_, mh_, m_}};
    z_bwd_ = fft::make_plan([&] { return fftw_plan_guru_dft_c2r(1, &z_dim, 2, z_many_back, cp, rp, FFTW_ESTIMATE); });

    fftw_iodim y_dim{m_, mh_, mh_};
    fftw_iodim y_many[2] = {{n_, line, line}, {mh_, 1, 1}};
    y_fwd_ = fft::make_plan([&] { return fftw_plan_guru_dft(1, &y_dim, 2, y_many, cp, cp, FFTW_FORWARD, FFTW_ESTIMATE); });
    y_bwd_ = fft::make_plan([&] { return fftw_plan_guru_dft(1, &y_dim, 2, y_many, cp, cp, FFTW_BACKWARD, FFTW_ESTIMATE); });

    fftw_iodim x_dim{m_, line, line};
    fftw_iodim x_many{line, 1, 1};
    x_fwd_ = fft::make_plan([&] { return fftw_plan_guru_dft(1, &x_dim, 1, &x_many, cp, cp, FFTW_FORWARD, FFTW_ESTIMATE); });
    x_bwd_ = fft::make_plan([&] { return fftw_plan_guru_dft(1, &x_dim, 1, &x_many, cp, cp, FFTW_BACKWARD, FFTW_ESTIMATE); });
  }

  std::size_t real_size() const { return static_cast<std::size_t>(n_) * n_ * m_; }
  std::size_t spectrum_size() const { return static_cast<std::size_t>(m_) * m_ * mh_; }

  /// spectrum <- DFT of the zero-padded density (spectrum is overwritten).
  void forward(const double* density, AlignedVector<double>& staging, AlignedVector<cplx>& spectrum) const {
    std::fill(staging.begin(), staging.end(), 0.0);
    for (std::size_t line = 0; line < static_cast<std::size_t>(n_) * n_; ++line)
      std::memcpy(&staging[line * m_], density + line * n_, sizeof(double) * n_);
    std::fill(spectrum.begin(), spectrum.end(), cplx{});
    auto* cp = fft::as_fftw(spectrum.data());
    fftw_execute_dft_r2c(z_fwd_.get(), staging.data(), cp);
    fftw_execute_dft(y_fwd_.get(), cp, cp);
    fftw_execute_dft(x_fwd_.get(), cp, cp);
  }

  /// out <- restriction to the n^3 block of the inverse DFT (normalized).
  void backward(AlignedVector<cplx>& spectrum, AlignedVector<double>& staging, double* out) const {
    auto* cp = fft::as_fftw(spectrum.data());
    fftw_execute_dft(x_bwd_.get(), cp, cp);
    fftw_execute_dft(y_bwd_.get(), cp, cp);
    fftw_execute_dft_c2r(z_bwd_.get(), cp, staging.data());
    const double norm = 1.0 / (static_cast<double>(m_) * m_ * m_);
    for (std::size_t line = 0; line < static_cast<std::size_t>(n_) * n_; ++line)
      for (int l = 0; l < n_; ++l) out[line * n_ + l] = staging[line * m_ + l] * norm;
  }

 private:
  int n_, m_, mh_;
  fft::Plan z_fwd_, z_bwd_, y_fwd_, y_bwd_, x_fwd_, x_bwd_;
};

inline const PaddedTransform& padded_transform(int n) {
  static std::mutex m;
  static std::map<int, std::unique_ptr<PaddedTransform>> cache;
  std::lock_guard lock(m);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<PaddedTransform>(n);
  return *slot;
}

}  // namespace detail

/// (W * density) on the grid with free-space boundary behaviour: zero-pad to
/// (2n)^3, multiply by the kernel's multiplier, restrict back.
inline RealField free_space_convolve(const RealField& density, const Kernel& kern) {
  require(density.grid() == kern.grid(), "kernel was built for a different grid");
  const int n = density.grid().n();
  const auto& tr = detail::padded_transform(n);
  AlignedVector<double> staging(tr.real_size());
  AlignedVector<cplx> spectrum(tr.spectrum_size());
  tr.forward(density.data(), staging, spectrum);
  const auto& mult = kern.multiplier();
  for (std::size_t i = 0; i < spectrum.size(); ++i) spectrum[i] *= mult[i];
  RealField out(density.grid());
  tr.backward(spectrum, staging, out.data());
  return out;
}

}  // namespace choquard
