#pragma once

// Per-frame colour and affect descriptors and the video-level lightness
// fluctuation pattern.

#include <avmir/emd.hpp>
#include <avmir/fft.hpp>
#include <avmir/imgprep.hpp>

#include <map>
#include <string>

namespace avmir {

/// Named per-frame descriptor.
struct FrameFeature {
  std::string name;
  std::vector<double> values;
};

namespace dims {
inline constexpr std::size_t kGcs = 6;
inline constexpr std::size_t kGev = 3;
inline constexpr std::size_t kColorfulness = 1;
inline constexpr std::size_t kColorNames = 8;
inline constexpr std::size_t kWaf = 18;
inline constexpr std::size_t kItten = 4;
}  // namespace dims

// ---------------------------------------------------------------- GCS / GEV

struct GcsResult {
  /// mean saturation, mean luminance, hue mean, hue deviation,
  /// saturation-weighted hue mean, saturation-weighted hue deviation
  std::array<double, 6> values{};
  bool degenerate_hue = false;
};

inline GcsResult gcs(const IhlsFrame& f) {
  GcsResult out;
  const std::size_t n = f.saturation.size();
  if (n == 0) throw InputError("empty IHLS frame");
  out.values[0] = stats::mean(f.saturation);
  out.values[1] = stats::mean(f.luminance);
  std::vector<double> hues, weights;
  for (std::size_t i = 0; i < n; ++i) {
    if (f.chromatic[i]) {
      hues.push_back(f.hue[i]);
      weights.push_back(f.saturation[i]);
    }
  }
  if (hues.empty()) {
    out.degenerate_hue = true;
    out.values[2] = 0.0;
    out.values[3] = kMaxCircularDeviation;
    out.values[4] = 0.0;
    out.values[5] = kMaxCircularDeviation;
    return out;
  }
  const CircularStats plain = circular_stats(hues);
  const CircularStats weighted = circular_stats(hues, std::span<const double>(weights));
  out.values[2] = plain.mean;
  out.values[3] = plain.deviation;
  out.values[4] = weighted.mean;
  out.values[5] = weighted.deviation;
  return out;
}

/// Pleasure, arousal, dominance from mean brightness B and saturation S.
inline std::array<double, 3> gev(double brightness, double saturation) {
  return {0.69 * brightness + 0.22 * saturation, -0.31 * brightness + 0.60 * saturation,
          0.76 * brightness + 0.32 * saturation};
}

inline std::array<double, 3> gev(const IhlsFrame& f) {
  return gev(stats::mean(f.luminance), stats::mean(f.saturation));
}

// ------------------------------------------------------------- Colorfulness

/// Normalised histogram over a partitions^3 RGB cube.
inline std::vector<double> rgb_cube_histogram(const Frame& frame, int partitions) {
  if (partitions < 2) throw InputError("colorfulness needs at least 2 partitions per axis");
  const auto p = static_cast<std::size_t>(partitions);
  std::vector<double> hist(p * p * p, 0.0);
  const auto cell = [p](std::uint8_t v) { return static_cast<std::size_t>(v) * p / 256; };
  for (const Rgb& px : frame.pixels()) hist[(cell(px.r) * p + cell(px.g)) * p + cell(px.b)] += 1.0;
  const double n = static_cast<double>(frame.pixel_count());
  for (double& h : hist) h /= n;
  return hist;
}

/// Euclidean ground distance between cell centres of the unit RGB cube.
inline Matrix rgb_cube_ground_distance(int partitions) {
  const auto p = static_cast<std::size_t>(partitions);
  const std::size_t n = p * p * p;
  Matrix d(n, n);
  const auto centre = [p](std::size_t idx) {
    const double s = 1.0 / static_cast<double>(p);
    return std::array<double, 3>{(static_cast<double>(idx / (p * p)) + 0.5) * s,
                                 (static_cast<double>((idx / p) % p) + 0.5) * s,
                                 (static_cast<double>(idx % p) + 0.5) * s};
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = centre(i);
    for (std::size_t j = 0; j < n; ++j) {
      const auto b = centre(j);
      d(i, j) = std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
    }
  }
  return d;
}

struct ColorfulnessResult {
  double score = 0.0;  // max_distance - emd
  double emd = 0.0;
  double max_distance = 0.0;
};

/// EMD between the frame's cube histogram and the uniform ("ideal
/// colourful") distribution, turned into a score that grows with colourfulness.
inline ColorfulnessResult colorfulness(const Frame& frame, int partitions = 4) {
  const std::vector<double> hist = rgb_cube_histogram(frame, partitions);
  const std::vector<double> ideal(hist.size(), 1.0 / static_cast<double>(hist.size()));
  const Matrix ground = rgb_cube_ground_distance(partitions);
  ColorfulnessResult out;
  out.emd = emd(hist, ideal, ground);
  out.max_distance = std::sqrt(3.0) * static_cast<double>(partitions - 1) / static_cast<double>(partitions);
  out.score = out.max_distance - out.emd;
  return out;
}

// -------------------------------------------------------------- Color Names

/// Magenta, Red, Yellow, Green, Cyan, Blue, Black, White.
inline constexpr std::array<Rgb, 8> kElementaryPalette = {{
    {255, 0, 255},
    {255, 0, 0},
    {255, 255, 0},
    {0, 255, 0},
    {0, 255, 255},
    {0, 0, 255},
    {0, 0, 0},
    {255, 255, 255},
}};

inline const std::array<std::string, 8>& color_name_labels() {
  static const std::array<std::string, 8> names = {"magenta", "red", "yellow", "green", "cyan", "blue", "black", "white"};
  return names;
}

struct ColorNameOptions {
  int tile = 22;
  double value_clip = 1.0;
  double saturation_clip = 1.0;
  int bayer_order = 32;
  double spread = 64.0;
};

/// HSV enhancement (CLAHE on V and S), ordered dithering to the eight
/// elementary colours, normalised 8-bin histogram.
inline std::array<double, 8> color_names(const Frame& frame, const ColorNameOptions& opt = {}) {
  HsvFrame hsv = rgb_to_hsv(frame);
  const auto rows = static_cast<std::size_t>(frame.height()), cols = static_cast<std::size_t>(frame.width());
  const auto enhance = [&](std::vector<double>& channel, double clip) {
    GrayRaster g(rows, cols);
    for (std::size_t i = 0; i < channel.size(); ++i) {
      g.values()[i] = static_cast<std::uint8_t>(std::lround(std::clamp(channel[i], 0.0, 1.0) * 255.0));
    }
    const GrayRaster e = clahe(g, opt.tile, opt.tile, clip);
    for (std::size_t i = 0; i < channel.size(); ++i) channel[i] = e.values()[i] / 255.0;
  };
  enhance(hsv.value, opt.value_clip);
  enhance(hsv.saturation, opt.saturation_clip);
  const Frame enhanced = hsv_to_rgb(hsv);
  const ThresholdMap map = bayer_matrix(opt.bayer_order);
  const Grid<std::uint8_t> idx = ordered_dither_quantize(enhanced, kElementaryPalette, map, opt.spread);
  std::array<double, 8> hist{};
  for (std::uint8_t k : idx.values()) hist[k] += 1.0;
  for (double& h : hist) h /= static_cast<double>(idx.size());
  return hist;
}

// ------------------------------------------------------------ Blur measure

/// Grey raster (0..255) from the IHLS luminance of a frame.
inline Matrix luminance_raster(const Frame& frame) {
  Matrix out(static_cast<std::size_t>(frame.height()), static_cast<std::size_t>(frame.width()));
  const auto px = frame.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) out.values()[i] = 0.2126 * px[i].r + 0.7152 * px[i].g + 0.0722 * px[i].b;
  return out;
}

/// Separable box filter with clamped borders; radius 4 gives the 9-tap filter.
inline Matrix box_blur(const Matrix& img, int radius_x, int radius_y) {
  const auto rows = static_cast<std::ptrdiff_t>(img.rows()), cols = static_cast<std::ptrdiff_t>(img.cols());
  Matrix tmp(img.rows(), img.cols()), out(img.rows(), img.cols());
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    for (std::ptrdiff_t c = 0; c < cols; ++c) {
      double s = 0.0;
      for (std::ptrdiff_t k = -radius_x; k <= radius_x; ++k) {
        s += img(static_cast<std::size_t>(r), static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(c + k, 0, cols - 1)));
      }
      tmp(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = s / (2 * radius_x + 1);
    }
  }
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    for (std::ptrdiff_t c = 0; c < cols; ++c) {
      double s = 0.0;
      for (std::ptrdiff_t k = -radius_y; k <= radius_y; ++k) {
        s += tmp(static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(r + k, 0, rows - 1)), static_cast<std::size_t>(c));
      }
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = s / (2 * radius_y + 1);
    }
  }
  return out;
}

/// No-reference sharpness after Crete et al.: compares neighbour variation of
/// the image with that of a strongly low-pass filtered copy, per direction.
/// 0 = maximally blurred (or flat), 1 = maximally sharp.
inline double blur_measure(const Matrix& gray) {
  if (gray.rows() < 3 || gray.cols() < 3) throw InputError("blur measure needs at least a 3x3 raster");
  const Matrix bv = box_blur(gray, 0, 4);
  const Matrix bh = box_blur(gray, 4, 0);
  double s_fv = 0.0, s_vv = 0.0, s_fh = 0.0, s_vh = 0.0;
  for (std::size_t r = 0; r < gray.rows(); ++r) {
    for (std::size_t c = 0; c < gray.cols(); ++c) {
      if (r > 0) {
        const double df = std::abs(gray(r, c) - gray(r - 1, c));
        const double db = std::abs(bv(r, c) - bv(r - 1, c));
        s_fv += df;
        s_vv += std::max(0.0, df - db);
      }
      if (c > 0) {
        const double df = std::abs(gray(r, c) - gray(r, c - 1));
        const double db = std::abs(bh(r, c) - bh(r, c - 1));
        s_fh += df;
        s_vh += std::max(0.0, df - db);
      }
    }
  }
  constexpr double kTiny = 1e-12;
  if (s_fv <= kTiny && s_fh <= kTiny) return 0.0;
  double blur = 0.0;
  if (s_fv > kTiny) blur = std::max(blur, (s_fv - s_vv) / s_fv);
  if (s_fh > kTiny) blur = std::max(blur, (s_fh - s_vh) / s_fh);
  return std::clamp(1.0 - blur, 0.0, 1.0);
}

// --------------------------------------------------- Wang affective factors

namespace waf_detail {

inline constexpr double kAchromaticChroma = 5.0;
inline constexpr std::array<double, 5> kLightnessCentres = {10.0, 30.0, 50.0, 70.0, 90.0};

inline double lightness_membership(double l, std::size_t level) {
  const double c = kLightnessCentres[level];
  if (level == 0 && l <= c) return 1.0;
  if (level == kLightnessCentres.size() - 1 && l >= c) return 1.0;
  return std::max(0.0, 1.0 - std::abs(l - c) / 20.0);
}

// low / mid / high chroma with peaks at 15, 45, 80
inline std::array<double, 3> chroma_membership(double c) {
  const double low = c < 15.0 ? c / 15.0 : std::max(0.0, 1.0 - (c - 15.0) / 30.0);
  const double mid = c < 45.0 ? std::max(0.0, (c - 15.0) / 30.0) : std::max(0.0, 1.0 - (c - 45.0) / 35.0);
  const double high = c < 80.0 ? std::max(0.0, (c - 45.0) / 35.0) : 1.0;
  return {low, mid, high};
}

}  // namespace waf_detail

/// Warm hues are L*C*h angles in (-70 deg, 110 deg).
inline bool is_warm_hue(double hue_rad) {
  const double deg = wrap_angle(hue_rad) * 180.0 / kPi;
  return deg < 110.0 || deg > 290.0;
}

/// 18 values: 10 fuzzy lightness x {cold, warm} shares, 6 warm/cool shares at
/// low/mid/high chroma, one chroma-contrast value, one sharpness value.
inline std::array<double, 18> waf(const LchFrame& f, double sharpness) {
  using namespace waf_detail;
  std::array<double, 18> out{};
  const std::size_t n = f.pixel_count();
  if (n == 0) throw InputError("empty L*C*h frame");
  for (std::size_t i = 0; i < n; ++i) {
    const double l = f.lightness[i], c = f.chroma[i];
    const bool chromatic = c >= kAchromaticChroma;
    const bool warm = is_warm_hue(f.hue[i]);
    const double w_cold = chromatic ? (warm ? 0.0 : 1.0) : 0.5;
    const double w_warm = 1.0 - w_cold;
    for (std::size_t k = 0; k < kLightnessCentres.size(); ++k) {
      const double mu = lightness_membership(l, k);
      out[2 * k] += mu * w_cold;
      out[2 * k + 1] += mu * w_warm;
    }
    if (chromatic) {
      const auto mu = chroma_membership(c);
      for (std::size_t s = 0; s < 3; ++s) out[10 + (warm ? 0 : 3) + s] += mu[s];
    }
  }
  for (std::size_t k = 0; k < 16; ++k) out[k] /= static_cast<double>(n);
  out[16] = n > 1 ? std::min(1.0, std::sqrt(stats::variance(f.chroma)) / 50.0) : 0.0;
  out[17] = std::clamp(sharpness, 0.0, 1.0);
  return out;
}

// -------------------------------------------------------------- Segmentation

struct SegmentationMap {
  int width = 0;
  int height = 0;
  std::vector<int> labels;
  int segment_count = 0;
  std::vector<double> mean_lightness;
  std::vector<double> mean_chroma;
  std::vector<double> mean_hue;  // hue of the mean (a*, b*) vector
  std::vector<std::size_t> area;
};

enum class SegmentMode { Grid, QuickShift };

struct SegmentOptions {
  SegmentMode mode = SegmentMode::Grid;
  int block = 16;
  double kernel_sigma = 2.0;
  double max_distance = 6.0;
  double color_ratio = 0.5;
};

/// Relabel to contiguous ids (first-seen order) and fill per-segment stats.
inline SegmentationMap finish_segmentation(const LchFrame& lch, std::vector<int> raw) {
  SegmentationMap seg;
  seg.width = lch.width;
  seg.height = lch.height;
  std::map<int, int> remap;
  for (int& l : raw) {
    auto [it, inserted] = remap.try_emplace(l, static_cast<int>(remap.size()));
    l = it->second;
  }
  seg.labels = std::move(raw);
  seg.segment_count = static_cast<int>(remap.size());
  const auto k = static_cast<std::size_t>(seg.segment_count);
  std::vector<double> sl(k, 0.0), sc(k, 0.0), sa(k, 0.0), sb(k, 0.0);
  seg.area.assign(k, 0);
  for (std::size_t i = 0; i < seg.labels.size(); ++i) {
    const auto s = static_cast<std::size_t>(seg.labels[i]);
    sl[s] += lch.lightness[i];
    sc[s] += lch.chroma[i];
    sa[s] += lch.chroma[i] * std::cos(lch.hue[i]);
    sb[s] += lch.chroma[i] * std::sin(lch.hue[i]);
    ++seg.area[s];
  }
  seg.mean_lightness.resize(k);
  seg.mean_chroma.resize(k);
  seg.mean_hue.resize(k);
  for (std::size_t s = 0; s < k; ++s) {
    const double a = static_cast<double>(seg.area[s]);
    seg.mean_lightness[s] = sl[s] / a;
    seg.mean_chroma[s] = sc[s] / a;
    seg.mean_hue[s] = wrap_angle(std::atan2(sb[s], sa[s]));
  }
  return seg;
}

namespace detail {

inline std::vector<int> grid_labels(int width, int height, int block) {
  if (block < 1) throw InputError("segment block size must be >= 1");
  const int bx = (width + block - 1) / block;
  std::vector<int> labels(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) labels[static_cast<std::size_t>(y * width + x)] = (y / block) * bx + x / block;
  }
  return labels;
}

// Quick-shift style mode seeking: each pixel links to the nearest pixel of
// higher Parzen density within max_distance in joint (x, y, colour) space.
inline std::vector<int> quickshift_labels(const LchFrame& lch, const SegmentOptions& opt) {
  const int w = lch.width, h = lch.height;
  const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  std::vector<std::array<double, 3>> col(n);
  for (std::size_t i = 0; i < n; ++i) {
    col[i] = {opt.color_ratio * lch.lightness[i], opt.color_ratio * lch.chroma[i] * std::cos(lch.hue[i]),
              opt.color_ratio * lch.chroma[i] * std::sin(lch.hue[i])};
  }
  const int radius = std::max(1, static_cast<int>(std::ceil(std::max(3.0 * opt.kernel_sigma, opt.max_distance))));
  const double inv2s2 = 1.0 / (2.0 * opt.kernel_sigma * opt.kernel_sigma);
  const auto dist2 = [&](std::size_t a, int ax, int ay, std::size_t b, int bx, int by) {
    const double dx = ax - bx, dy = ay - by;
    const double dl = col[a][0] - col[b][0], da = col[a][1] - col[b][1], db = col[a][2] - col[b][2];
    return dx * dx + dy * dy + dl * dl + da * da + db * db;
  };
  std::vector<double> density(n, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y * w + x);
      double d = 0.0;
      for (int yy = std::max(0, y - radius); yy <= std::min(h - 1, y + radius); ++yy) {
        for (int xx = std::max(0, x - radius); xx <= std::min(w - 1, x + radius); ++xx) {
          d += std::exp(-dist2(i, x, y, static_cast<std::size_t>(yy * w + xx), xx, yy) * inv2s2);
        }
      }
      // index-based tie-break keeps the forest acyclic on plateaus
      density[i] = d + 1e-9 * static_cast<double>(i) / static_cast<double>(n);
    }
  }
  std::vector<std::size_t> parent(n);
  const double tau2 = opt.max_distance * opt.max_distance;
  const int link_r = static_cast<int>(std::ceil(opt.max_distance));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y * w + x);
      parent[i] = i;
      double best = std::numeric_limits<double>::infinity();
      for (int yy = std::max(0, y - link_r); yy <= std::min(h - 1, y + link_r); ++yy) {
        for (int xx = std::max(0, x - link_r); xx <= std::min(w - 1, x + link_r); ++xx) {
          const auto j = static_cast<std::size_t>(yy * w + xx);
          if (density[j] <= density[i]) continue;
          const double d = dist2(i, x, y, j, xx, yy);
          if (d < tau2 && d < best) {
            best = d;
            parent[i] = j;
          }
        }
      }
    }
  }
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = i;
    while (parent[r] != r) r = parent[r];
    labels[i] = static_cast<int>(r);
  }
  return labels;
}

}  // namespace detail

inline SegmentationMap segment_frame(const LchFrame& lch, const SegmentOptions& opt = {}) {
  if (lch.width < 1 || lch.height < 1) throw InputError("cannot segment an empty frame");
  std::vector<int> raw = opt.mode == SegmentMode::Grid ? detail::grid_labels(lch.width, lch.height, opt.block)
                                                       : detail::quickshift_labels(lch, opt);
  return finish_segmentation(lch, std::move(raw));
}

inline SegmentationMap segment_frame(const Frame& frame, const SegmentOptions& opt = {}) {
  return segment_frame(rgb_to_lch(frame), opt);
}

// ---------------------------------------------------------- Itten contrasts

/// Light-dark, saturation, hue and warm-cold contrast over segments, each in
/// [0, 1]. Dispersion is the area-weighted mean absolute deviation from the
/// area-weighted mean, divided by half the value range.
inline std::array<double, 4> itten_contrasts(const SegmentationMap& seg) {
  std::array<double, 4> out{};
  const auto k = static_cast<std::size_t>(seg.segment_count);
  if (k < 2) return out;
  double total = 0.0;
  for (std::size_t a : seg.area) total += static_cast<double>(a);
  const auto dispersion = [&](const std::vector<double>& v, double half_range) {
    double mu = 0.0;
    for (std::size_t s = 0; s < k; ++s) mu += static_cast<double>(seg.area[s]) * v[s];
    mu /= total;
    double mad = 0.0;
    for (std::size_t s = 0; s < k; ++s) mad += static_cast<double>(seg.area[s]) * std::abs(v[s] - mu);
    return std::min(1.0, mad / total / half_range);
  };
  out[0] = dispersion(seg.mean_lightness, 50.0);
  out[1] = dispersion(seg.mean_chroma, 67.0);

  std::vector<double> hues, weights;
  double warm = 0.0, cold = 0.0;
  for (std::size_t s = 0; s < k; ++s) {
    if (seg.mean_chroma[s] < waf_detail::kAchromaticChroma) continue;
    hues.push_back(seg.mean_hue[s]);
    weights.push_back(static_cast<double>(seg.area[s]));
    (is_warm_hue(seg.mean_hue[s]) ? warm : cold) += static_cast<double>(seg.area[s]);
  }
  if (!hues.empty()) {
    out[2] = circular_stats(hues, std::span<const double>(weights)).deviation / kMaxCircularDeviation;
    out[3] = 1.0 - std::abs(warm - cold) / (warm + cold);
  }
  return out;
}

/// Recomputes segment statistics from the frame before measuring contrasts.
inline std::array<double, 4> itten_contrasts(const LchFrame& frame, const SegmentationMap& seg) {
  if (frame.width != seg.width || frame.height != seg.height) throw InputError("segmentation does not match the frame size");
  return itten_contrasts(finish_segmentation(frame, seg.labels));
}

// ---------------------------------------------- Lightness fluctuation pattern

/// Normalised histogram of L* in [0, 100] with `bins` equal bins.
inline std::vector<double> lightness_histogram(const LchFrame& f, int bins = 24) {
  if (bins < 1) throw InputError("lightness histogram needs >= 1 bin");
  std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
  for (double l : f.lightness) {
    const auto b = std::min<std::size_t>(static_cast<std::size_t>(bins) - 1,
                                         static_cast<std::size_t>(std::clamp(l, 0.0, 100.0) / 100.0 * bins));
    h[b] += 1.0;
  }
  for (double& v : h) v /= static_cast<double>(f.pixel_count());
  return h;
}

struct LfpOptions {
  std::size_t window = 512;
  double max_modulation_hz = 10.0;
};

struct LfpPattern {
  std::size_t bins = 0;
  std::vector<double> modulation_hz;  // centre frequency of each retained bin
  Matrix values;                      // bins x modulation bins
  std::vector<double> histogram;      // column sums of values
  std::size_t windows = 0;
  bool short_input = false;
};

/// Modulation spectrum of each lightness-bin time series. `series` holds one
/// histogram per frame (frames x bins). Each window is mean-removed per bin,
/// zero-padded to the window length, transformed, and the magnitudes of the
/// bins in (0, max_modulation_hz] are averaged over windows.
inline LfpPattern lfp(const Matrix& series, double fps, const LfpOptions& opt = {}) {
  if (series.rows() < 2) throw InputError("LFP needs at least 2 frames");
  if (!(fps > 2.0 * opt.max_modulation_hz)) throw InputError("LFP frame rate must exceed twice the maximum modulation frequency");
  if (opt.window < 2) throw InputError("LFP window must be >= 2 frames");
  const std::size_t frames = series.rows(), bins = series.cols();
  LfpPattern out;
  out.bins = bins;
  out.short_input = frames < opt.window;
  std::vector<std::size_t> keep;
  for (std::size_t k = 1; k <= opt.window / 2; ++k) {
    const double f = static_cast<double>(k) * fps / static_cast<double>(opt.window);
    if (f > opt.max_modulation_hz + 1e-12) break;
    keep.push_back(k);
    out.modulation_hz.push_back(f);
  }
  out.values = Matrix(bins, keep.size(), 0.0);
  RealFft fft(opt.window);
  std::vector<double> buf(opt.window), mag(fft.bins());
  for (std::size_t start = 0; start < frames; start += opt.window) {
    const std::size_t len = std::min(opt.window, frames - start);
    for (std::size_t b = 0; b < bins; ++b) {
      double mu = 0.0;
      for (std::size_t t = 0; t < len; ++t) mu += series(start + t, b);
      mu /= static_cast<double>(len);
      std::fill(buf.begin(), buf.end(), 0.0);
      for (std::size_t t = 0; t < len; ++t) buf[t] = series(start + t, b) - mu;
      fft.magnitude(buf, mag);
      for (std::size_t m = 0; m < keep.size(); ++m) out.values(b, m) += mag[keep[m]] / static_cast<double>(opt.window);
    }
    ++out.windows;
  }
  for (double& v : out.values.values()) v /= static_cast<double>(out.windows);
  out.histogram.assign(keep.size(), 0.0);
  for (std::size_t b = 0; b < bins; ++b) {
    for (std::size_t m = 0; m < keep.size(); ++m) out.histogram[m] += out.values(b, m);
  }
  return out;
}

enum class LfpPreset {
  Full,     // 24 lightness bins x all modulation bins up to 10 Hz
  Bands80,  // 8 lightness bins x 10 one-hertz bands
  Bands60,  // 60 modulation bands, summed over 24 lightness bins
};

/// Sum adjacent histogram bins: frames x (bins) -> frames x (bins / factor).
inline Matrix merge_histogram_bins(const Matrix& series, std::size_t factor) {
  if (factor == 0 || series.cols() % factor != 0) throw InputError("histogram bins not divisible by merge factor");
  Matrix out(series.rows(), series.cols() / factor, 0.0);
  for (std::size_t r = 0; r < series.rows(); ++r) {
    for (std::size_t c = 0; c < series.cols(); ++c) out(r, c / factor) += series(r, c);
  }
  return out;
}

/// Sum spectrum values into `bands` equal bands over (0, max_hz].
inline std::vector<double> band_sum(std::span<const double> values, std::span<const double> freqs, std::size_t bands,
                                    double max_hz) {
  std::vector<double> out(bands, 0.0);
  const double width = max_hz / static_cast<double>(bands);
  for (std::size_t m = 0; m < values.size(); ++m) {
    const double pos = freqs[m] / width;
    auto b = static_cast<std::size_t>(std::ceil(pos - 1e-9));
    b = b == 0 ? 0 : b - 1;
    if (b < bands) out[b] += values[m];
  }
  return out;
}

/// Flattened LFP feature from a 24-bin lightness histogram series.
inline std::vector<double> lfp_feature(const Matrix& series24, double fps, LfpPreset preset, const LfpOptions& opt = {}) {
  if (series24.cols() != 24) throw InputError("LFP presets expect a 24-bin lightness series");
  switch (preset) {
    case LfpPreset::Full: {
      return lfp(series24, fps, opt).values.values();
    }
    case LfpPreset::Bands80: {
      const LfpPattern p = lfp(merge_histogram_bins(series24, 3), fps, opt);
      std::vector<double> out;
      out.reserve(80);
      for (std::size_t b = 0; b < p.bins; ++b) {
        const auto bands = band_sum(p.values.row(b), p.modulation_hz, 10, opt.max_modulation_hz);
        out.insert(out.end(), bands.begin(), bands.end());
      }
      return out;
    }
    case LfpPreset::Bands60: {
      const LfpPattern p = lfp(series24, fps, opt);
      return band_sum(p.histogram, p.modulation_hz, 60, opt.max_modulation_hz);
    }
  }
  throw InvariantError("unknown LFP preset");
}

inline std::size_t lfp_dimension(LfpPreset preset, double fps, const LfpOptions& opt = {}) {
  switch (preset) {
    case LfpPreset::Bands80: return 80;
    case LfpPreset::Bands60: return 60;
    case LfpPreset::Full: {
      std::size_t m = 0;
      for (std::size_t k = 1; k <= opt.window / 2; ++k) {
        if (static_cast<double>(k) * fps / static_cast<double>(opt.window) > opt.max_modulation_hz + 1e-12) break;
        ++m;
      }
      return 24 * m;
    }
  }
  return 0;
}

}  // namespace avmir
