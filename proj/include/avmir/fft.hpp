#pragma once

// Thin RAII wrapper around an FFTW real-to-complex plan.

#include <avmir/core.hpp>

#include <fftw3.h>

#include <complex>
#include <memory>
#include <mutex>

namespace avmir {

namespace detail {
// FFTW's planner is not re-entrant; execution on distinct buffers is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Forward real FFT of fixed length n; yields n/2 + 1 complex bins.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    if (n == 0) throw InputError("FFT length must be positive");
    in_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
    out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
    if (in_ == nullptr || out_ == nullptr) {
      release();
      throw std::bad_alloc();
    }
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() { release(); }

  std::size_t size() const noexcept { return n_; }
  std::size_t bins() const noexcept { return n_ / 2 + 1; }

  /// Transform `input` (zero-padded or truncated to n) and return |X_k|^2.
  void power(std::span<const double> input, std::span<double> out) {
    load(input);
    fftw_execute(plan_);
    for (std::size_t k = 0; k < bins(); ++k) out[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

  /// Transform `input` and return |X_k|.
  void magnitude(std::span<const double> input, std::span<double> out) {
    power(input, out);
    for (std::size_t k = 0; k < bins(); ++k) out[k] = std::sqrt(out[k]);
  }

 private:
  void load(std::span<const double> input) {
    const std::size_t m = std::min(n_, input.size());
    std::copy_n(input.begin(), m, in_);
    std::fill(in_ + m, in_ + n_, 0.0);
  }

  void release() {
    if (plan_ != nullptr) {
      std::lock_guard lock(detail::fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    if (in_ != nullptr) fftw_free(in_);
    if (out_ != nullptr) fftw_free(out_);
    plan_ = nullptr;
    in_ = nullptr;
    out_ = nullptr;
  }

  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

/// Periodic Hann window of length n.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

}  // namespace avmir
