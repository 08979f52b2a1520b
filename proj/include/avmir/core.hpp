#pragma once

// Shared value types for the avmir toolkit: error classes, a dense row-major
// grid, a portable seeded RNG and the order statistics used by every
// aggregation stage.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace avmir {

/// Base class of all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent user input (CLI exit code 2).
class InputError : public Error {
 public:
  using Error::Error;
};

/// An internal invariant was violated (CLI exit code 3).
class InvariantError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Dense row-major 2-D array.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Grid(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw InvariantError("grid payload does not match its shape");
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<T> column(std::size_t c) const {
    std::vector<T> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = Grid<double>;

/// Seeded generator whose output depends only on the seed, not on the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw InvariantError("Rng::below with zero bound");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  /// Uniform real in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

namespace stats {

inline double mean(std::span<const double> x) {
  if (x.empty()) throw InputError("mean of empty sequence");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double median(std::span<const double> x) {
  if (x.empty()) throw InputError("median of empty sequence");
  std::vector<double> v(x.begin(), x.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

inline double min(std::span<const double> x) {
  if (x.empty()) throw InputError("min of empty sequence");
  return *std::min_element(x.begin(), x.end());
}

inline double max(std::span<const double> x) {
  if (x.empty()) throw InputError("max of empty sequence");
  return *std::max_element(x.begin(), x.end());
}

/// Central moments m2, m3, m4 (population normalisation).
struct CentralMoments {
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  bool constant = true;
};

inline CentralMoments central_moments(std::span<const double> x) {
  CentralMoments cm;
  if (x.empty()) throw InputError("moments of empty sequence");
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*lo == *hi) return cm;
  cm.constant = false;
  const double mu = mean(x);
  for (double v : x) {
    const double d = v - mu;
    const double d2 = d * d;
    cm.m2 += d2;
    cm.m3 += d2 * d;
    cm.m4 += d2 * d2;
  }
  const double n = static_cast<double>(x.size());
  cm.m2 /= n;
  cm.m3 /= n;
  cm.m4 /= n;
  return cm;
}

inline double variance(std::span<const double> x) { return central_moments(x).m2; }

// Standardised third moment; 0 for constant input.
inline double skewness(std::span<const double> x) {
  const auto cm = central_moments(x);
  if (cm.constant || cm.m2 <= 0.0) return 0.0;
  return cm.m3 / std::pow(cm.m2, 1.5);
}

// Standardised fourth moment, not excess; 0 for constant input.
inline double kurtosis(std::span<const double> x) {
  const auto cm = central_moments(x);
  if (cm.constant || cm.m2 <= 0.0) return 0.0;
  return cm.m4 / (cm.m2 * cm.m2);
}

/// min, max, mean, median, variance, skewness, kurtosis, in that order.
inline std::array<double, 7> seven(std::span<const double> x) {
  const auto cm = central_moments(x);
  const bool flat = cm.constant || cm.m2 <= 0.0;
  return {min(x),
          max(x),
          mean(x),
          median(x),
          cm.m2,
          flat ? 0.0 : cm.m3 / std::pow(cm.m2, 1.5),
          flat ? 0.0 : cm.m4 / (cm.m2 * cm.m2)};
}

}  // namespace stats

/// Wrap an angle into [0, 2*pi).
inline double wrap_angle(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

}  // namespace avmir
