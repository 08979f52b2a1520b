#pragma once

// Mean color bars, inter-frame activity profiles and a naive sliding-window
// cut detector. The detector is a baseline: it over-fires on strobes,
// flicker and skip-frame edits.

#include <avmir/imgprep.hpp>

#include <optional>

namespace avmir {

/// One column per frame holding per-row RGB channel means.
class MeanColorBar {
 public:
  void add(const Frame& f) {
    if (columns_ == 0) {
      height_ = static_cast<std::size_t>(f.height());
    } else if (static_cast<std::size_t>(f.height()) != height_) {
      throw InputError("frame " + std::to_string(columns_) + " height differs from the first frame");
    }
    const double w = f.width();
    for (int y = 0; y < f.height(); ++y) {
      double s[3] = {0.0, 0.0, 0.0};
      for (int x = 0; x < f.width(); ++x) {
        const Rgb p = f.at(x, y);
        s[0] += p.r;
        s[1] += p.g;
        s[2] += p.b;
      }
      for (double v : s) means_.push_back(v / w);
    }
    ++columns_;
  }

  std::size_t width() const noexcept { return columns_; }
  std::size_t height() const noexcept { return height_; }

  /// Mean of channel ch (0..2) at row y of column x.
  double mean(std::size_t x, std::size_t y, std::size_t ch) const { return means_[(x * height_ + y) * 3 + ch]; }

  /// Rounded raster; optionally resampled to a fixed height by linear interpolation.
  Frame image(std::optional<int> resample_height = std::nullopt) const {
    if (columns_ == 0) throw InputError("mean color bar has no frames");
    const int h = resample_height.value_or(static_cast<int>(height_));
    if (h < 1) throw InputError("resample height must be positive");
    Frame out(static_cast<int>(columns_), h);
    for (std::size_t x = 0; x < columns_; ++x) {
      for (int y = 0; y < h; ++y) {
        double src = h == 1 ? 0.0 : static_cast<double>(y) * static_cast<double>(height_ - 1) / static_cast<double>(h - 1);
        if (!resample_height) src = y;
        const auto y0 = static_cast<std::size_t>(std::floor(src));
        const std::size_t y1 = std::min(y0 + 1, height_ - 1);
        const double t = src - static_cast<double>(y0);
        std::uint8_t v[3];
        for (std::size_t ch = 0; ch < 3; ++ch) {
          const double m = (1.0 - t) * mean(x, y0, ch) + t * mean(x, y1, ch);
          v[ch] = static_cast<std::uint8_t>(std::clamp(std::lround(m), 0L, 255L));
        }
        out.at(static_cast<int>(x), y) = {v[0], v[1], v[2]};
      }
    }
    return out;
  }

 private:
  std::size_t columns_ = 0;
  std::size_t height_ = 0;
  std::vector<double> means_;
};

inline MeanColorBar mean_color_bar(std::span<const Frame> frames) {
  if (frames.empty()) throw InputError("mean color bar needs at least one frame");
  MeanColorBar bar;
  for (const Frame& f : frames) bar.add(f);
  return bar;
}

enum class ActivityMetric { MeanRgbL1, HistogramChi2 };

inline ActivityMetric parse_activity_metric(std::string_view s) {
  if (s == "mean-rgb-l1") return ActivityMetric::MeanRgbL1;
  if (s == "histogram-chi2") return ActivityMetric::HistogramChi2;
  throw InputError("unknown activity metric '" + std::string(s) + "'");
}

inline constexpr std::size_t kActivityBins = 16;  // per channel

struct ActivityProfile {
  ActivityMetric metric = ActivityMetric::MeanRgbL1;
  std::vector<double> distances;  // frames - 1, each in [0, 1]
};

/// Per-frame summary that the activity distance compares.
inline std::vector<double> activity_signature(const Frame& f, ActivityMetric metric) {
  const double n = static_cast<double>(f.pixel_count());
  if (metric == ActivityMetric::MeanRgbL1) {
    std::vector<double> m(3, 0.0);
    for (const Rgb& p : f.pixels()) {
      m[0] += p.r;
      m[1] += p.g;
      m[2] += p.b;
    }
    for (double& v : m) v /= n;
    return m;
  }
  std::vector<double> h(3 * kActivityBins, 0.0);
  for (const Rgb& p : f.pixels()) {
    h[p.r * kActivityBins / 256] += 1.0;
    h[kActivityBins + p.g * kActivityBins / 256] += 1.0;
    h[2 * kActivityBins + p.b * kActivityBins / 256] += 1.0;
  }
  for (double& v : h) v /= n;
  return h;
}

/// Mean-RGB L1 is divided by 765; the three per-channel histogram chi-square
/// terms (each at most 2) are divided by 6.
inline double activity_distance(std::span<const double> a, std::span<const double> b, ActivityMetric metric) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (metric == ActivityMetric::MeanRgbL1) {
      d += std::abs(a[i] - b[i]);
    } else if (a[i] + b[i] > 0.0) {
      d += (a[i] - b[i]) * (a[i] - b[i]) / (a[i] + b[i]);
    }
  }
  return metric == ActivityMetric::MeanRgbL1 ? d / 765.0 : d / 6.0;
}

/// Incremental profile; feed frames in order.
class ActivityTracker {
 public:
  explicit ActivityTracker(ActivityMetric metric) { profile_.metric = metric; }

  void add(const Frame& f) {
    std::vector<double> sig = activity_signature(f, profile_.metric);
    if (!prev_.empty()) profile_.distances.push_back(activity_distance(prev_, sig, profile_.metric));
    prev_ = std::move(sig);
  }

  const ActivityProfile& profile() const noexcept { return profile_; }

 private:
  ActivityProfile profile_;
  std::vector<double> prev_;
};

inline ActivityProfile frame_activity(std::span<const Frame> frames, ActivityMetric metric) {
  if (frames.size() < 2) throw InputError("frame activity needs at least two frames");
  ActivityTracker t(metric);
  for (const Frame& f : frames) t.add(f);
  return t.profile();
}

struct CutOptions {
  int window = 15;
  double kappa = 3.0;
};

/// Boundary frame indices: transition i (between frames i and i+1) reports
/// i+1 when profile[i] exceeds kappa times the window median and is the
/// window maximum (first occurrence on plateaus).
inline std::vector<std::size_t> naive_cut_detect(const ActivityProfile& profile, const CutOptions& opt = {}) {
  if (opt.window < 3 || opt.window % 2 == 0) throw InputError("cut window must be odd and >= 3");
  if (opt.kappa < 0.0) throw InputError("kappa must be non-negative");
  const auto& p = profile.distances;
  const auto half = static_cast<std::size_t>(opt.window / 2);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0, hi = std::min(p.size() - 1, i + half);
    std::vector<double> win(p.begin() + static_cast<std::ptrdiff_t>(lo), p.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    bool is_max = true;
    for (std::size_t j = lo; j <= hi && is_max; ++j) {
      if (j < i ? p[j] >= p[i] : p[j] > p[i]) is_max = false;
    }
    if (is_max && p[i] > stats::median(win) * opt.kappa) out.push_back(i + 1);
  }
  return out;
}

}  // namespace avmir
