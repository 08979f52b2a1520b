#pragma once

// Frame substrate for the visual features: RGB frames, letterbox removal,
// IHLS / HSV / CIE L*C*h conversions, CLAHE, Bayer ordered dithering and
// circular hue statistics.

#include <avmir/core.hpp>

#include <optional>

namespace avmir {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  bool operator==(const Rgb&) const = default;
};

/// 8-bit RGB raster, row-major.
class Frame {
 public:
  Frame() = default;
  Frame(int width, int height, Rgb fill = {}) : Frame(width, height, std::vector<Rgb>(checked_count(width, height), fill)) {}
  Frame(int width, int height, std::vector<Rgb> pixels) : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (pixels_.size() != checked_count(width, height)) {
      throw InputError("frame pixel count does not match " + std::to_string(width) + "x" + std::to_string(height));
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return pixels_.size(); }

  Rgb& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)]; }
  const Rgb& at(int x, int y) const {
    return pixels_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)];
  }

  std::span<const Rgb> pixels() const noexcept { return pixels_; }
  std::span<Rgb> pixels() noexcept { return pixels_; }

  /// Sub-rectangle [x0, x0+w) x [y0, y0+h).
  Frame crop(int x0, int y0, int w, int h) const {
    if (x0 < 0 || y0 < 0 || w < 1 || h < 1 || x0 + w > width_ || y0 + h > height_) {
      throw InputError("crop rectangle outside frame");
    }
    std::vector<Rgb> out;
    out.reserve(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    for (int y = y0; y < y0 + h; ++y) {
      for (int x = x0; x < x0 + w; ++x) out.push_back(at(x, y));
    }
    return Frame(w, h, std::move(out));
  }

  bool operator==(const Frame&) const = default;

 private:
  static std::size_t checked_count(int width, int height) {
    if (width < 1 || height < 1) throw InputError("frame dimensions must be positive");
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<Rgb> pixels_;
};

/// Per-pixel IHLS planes. Hue in [0, 2pi), luminance and saturation in [0, 1].
struct IhlsFrame {
  int width = 0;
  int height = 0;
  std::vector<double> hue;
  std::vector<double> luminance;
  std::vector<double> saturation;
  std::vector<std::uint8_t> chromatic;
};

/// Per-pixel CIE L*C*h planes (D65). L in [0, 100], C >= 0, H in [0, 2pi).
struct LchFrame {
  int width = 0;
  int height = 0;
  std::vector<double> lightness;
  std::vector<double> chroma;
  std::vector<double> hue;

  std::size_t pixel_count() const noexcept { return lightness.size(); }
};

/// HSV planes, all channels in [0, 1] (hue as a fraction of a turn).
struct HsvFrame {
  int width = 0;
  int height = 0;
  std::vector<double> hue;
  std::vector<double> saturation;
  std::vector<double> value;
};

struct CircularStats {
  double mean = 0.0;       // radians, [0, 2pi)
  double deviation = 0.0;  // sqrt(2 (1 - R)), [0, sqrt 2]
  bool weighted = false;
};

inline constexpr double kAchromaticSaturation = 0.05;
inline constexpr double kMaxCircularDeviation = std::numbers::sqrt2;

struct LetterboxOptions {
  int darkness_threshold = 24;
  double row_fraction = 0.98;
};

namespace detail {

inline bool dark(const Rgb& p, int threshold) {
  return std::max({p.r, p.g, p.b}) <= threshold;
}

inline double dark_fraction_row(const Frame& f, int y, int x0, int x1, int threshold) {
  int n = 0;
  for (int x = x0; x < x1; ++x) n += dark(f.at(x, y), threshold) ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(x1 - x0);
}

inline double dark_fraction_col(const Frame& f, int x, int y0, int y1, int threshold) {
  int n = 0;
  for (int y = y0; y < y1; ++y) n += dark(f.at(x, y), threshold) ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(y1 - y0);
}

}  // namespace detail

/// Remove contiguous dark border rows and columns (letterbox / pillarbox
/// bars). Iterates to a fixed point, so the result is idempotent. Frames
/// whose every row or column is dark are returned unchanged.
inline Frame strip_letterbox(const Frame& frame, LetterboxOptions opt = {}) {
  int x0 = 0, x1 = frame.width(), y0 = 0, y1 = frame.height();
  const auto is_bar_row = [&](int y) { return detail::dark_fraction_row(frame, y, x0, x1, opt.darkness_threshold) > opt.row_fraction; };
  const auto is_bar_col = [&](int x) { return detail::dark_fraction_col(frame, x, y0, y1, opt.darkness_threshold) > opt.row_fraction; };
  bool changed = true;
  while (changed) {
    changed = false;
    while (y0 < y1 && is_bar_row(y0)) ++y0, changed = true;
    while (y1 > y0 && is_bar_row(y1 - 1)) --y1, changed = true;
    if (y0 >= y1) return frame;
    while (x0 < x1 && is_bar_col(x0)) ++x0, changed = true;
    while (x1 > x0 && is_bar_col(x1 - 1)) --x1, changed = true;
    if (x0 >= x1) return frame;
  }
  if (x0 == 0 && y0 == 0 && x1 == frame.width() && y1 == frame.height()) return frame;
  return frame.crop(x0, y0, x1 - x0, y1 - y0);
}

struct IhlsPixel {
  double hue = 0.0;
  double luminance = 0.0;
  double saturation = 0.0;
};

/// Hanbury's IHLS: Y = Rec.709 weighted sum, S = max - min, hue from the
/// chromatic plane (C1, C2). Hue of achromatic pixels is reported as 0.
inline IhlsPixel ihls_pixel(Rgb p) {
  const double r = p.r / 255.0, g = p.g / 255.0, b = p.b / 255.0;
  IhlsPixel out;
  out.luminance = 0.2126 * r + 0.7152 * g + 0.0722 * b;
  out.saturation = (std::max({p.r, p.g, p.b}) - std::min({p.r, p.g, p.b})) / 255.0;
  const double c1 = r - 0.5 * (g + b);
  const double c2 = 0.5 * std::numbers::sqrt3 * (b - g);
  const double c = std::hypot(c1, c2);
  if (c > 0.0) {
    const double h = std::acos(std::clamp(c1 / c, -1.0, 1.0));
    out.hue = c2 <= 0.0 ? h : kTwoPi - h;
    out.hue = wrap_angle(out.hue);
  }
  return out;
}

inline IhlsFrame rgb_to_ihls(const Frame& frame, double achromatic_eps = kAchromaticSaturation) {
  IhlsFrame out;
  out.width = frame.width();
  out.height = frame.height();
  const std::size_t n = frame.pixel_count();
  out.hue.resize(n);
  out.luminance.resize(n);
  out.saturation.resize(n);
  out.chromatic.resize(n);
  const auto px = frame.pixels();
  for (std::size_t i = 0; i < n; ++i) {
    const IhlsPixel p = ihls_pixel(px[i]);
    out.hue[i] = p.hue;
    out.luminance[i] = p.luminance;
    out.saturation[i] = p.saturation;
    out.chromatic[i] = p.saturation >= achromatic_eps ? 1 : 0;
  }
  return out;
}

struct Lab {
  double l = 0.0;
  double a = 0.0;
  double b = 0.0;
};

namespace detail {

inline double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

inline double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

// sRGB primaries to XYZ; the D65 white point is the row sum of this matrix.
inline constexpr double kSrgbToXyz[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};

}  // namespace detail

inline Lab rgb_to_lab(Rgb p) {
  const double lin[3] = {detail::srgb_to_linear(p.r / 255.0), detail::srgb_to_linear(p.g / 255.0),
                         detail::srgb_to_linear(p.b / 255.0)};
  double xyz[3];
  double white[3];
  for (int i = 0; i < 3; ++i) {
    xyz[i] = 0.0;
    white[i] = 0.0;
    for (int j = 0; j < 3; ++j) {
      xyz[i] += detail::kSrgbToXyz[i][j] * lin[j];
      white[i] += detail::kSrgbToXyz[i][j];
    }
  }
  const double fx = detail::lab_f(xyz[0] / white[0]);
  const double fy = detail::lab_f(xyz[1] / white[1]);
  const double fz = detail::lab_f(xyz[2] / white[2]);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

inline LchFrame rgb_to_lch(const Frame& frame) {
  LchFrame out;
  out.width = frame.width();
  out.height = frame.height();
  const std::size_t n = frame.pixel_count();
  out.lightness.resize(n);
  out.chroma.resize(n);
  out.hue.resize(n);
  const auto px = frame.pixels();
  for (std::size_t i = 0; i < n; ++i) {
    const Lab lab = rgb_to_lab(px[i]);
    out.lightness[i] = std::clamp(lab.l, 0.0, 100.0);
    out.chroma[i] = std::hypot(lab.a, lab.b);
    out.hue[i] = wrap_angle(std::atan2(lab.b, lab.a));
  }
  return out;
}

inline HsvFrame rgb_to_hsv(const Frame& frame) {
  HsvFrame out;
  out.width = frame.width();
  out.height = frame.height();
  const std::size_t n = frame.pixel_count();
  out.hue.resize(n);
  out.saturation.resize(n);
  out.value.resize(n);
  const auto px = frame.pixels();
  for (std::size_t i = 0; i < n; ++i) {
    const double r = px[i].r / 255.0, g = px[i].g / 255.0, b = px[i].b / 255.0;
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double d = mx - mn;
    double h = 0.0;
    if (d > 0.0) {
      if (mx == r) {
        h = std::fmod((g - b) / d, 6.0);
      } else if (mx == g) {
        h = (b - r) / d + 2.0;
      } else {
        h = (r - g) / d + 4.0;
      }
      h /= 6.0;
      if (h < 0.0) h += 1.0;
    }
    out.hue[i] = h;
    out.saturation[i] = mx > 0.0 ? d / mx : 0.0;
    out.value[i] = mx;
  }
  return out;
}

inline Frame hsv_to_rgb(const HsvFrame& hsv) {
  std::vector<Rgb> px(hsv.value.size());
  const auto to8 = [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double h6 = std::fmod(hsv.hue[i], 1.0) * 6.0;
    const double s = hsv.saturation[i], v = hsv.value[i];
    const double c = v * s;
    const double x = c * (1.0 - std::abs(std::fmod(h6, 2.0) - 1.0));
    const double m = v - c;
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(h6) % 6) {
      case 0: r = c, g = x; break;
      case 1: r = x, g = c; break;
      case 2: g = c, b = x; break;
      case 3: g = x, b = c; break;
      case 4: r = x, b = c; break;
      default: r = c, b = x; break;
    }
    px[i] = {to8(r + m), to8(g + m), to8(b + m)};
  }
  return Frame(hsv.width, hsv.height, std::move(px));
}

/// Angular mean and deviation sqrt(2(1-R)) of a set of angles, optionally
/// weighted by nonnegative weights.
inline CircularStats circular_stats(std::span<const double> hues,
                                    std::optional<std::span<const double>> weights = std::nullopt) {
  if (hues.empty()) throw InputError("no chromatic pixels");
  if (weights && weights->size() != hues.size()) throw InputError("hue and weight counts differ");
  double sx = 0.0, sy = 0.0, sw = 0.0;
  for (std::size_t i = 0; i < hues.size(); ++i) {
    const double w = weights ? (*weights)[i] : 1.0;
    if (w < 0.0) throw InputError("negative circular weight");
    sx += w * std::cos(hues[i]);
    sy += w * std::sin(hues[i]);
    sw += w;
  }
  if (sw <= 0.0) throw InputError("no chromatic pixels");
  const double r = std::min(1.0, std::hypot(sx, sy) / sw);
  return {wrap_angle(std::atan2(sy, sx)), std::sqrt(2.0 * (1.0 - r)), weights.has_value()};
}

/// 8-bit single channel raster.
using GrayRaster = Grid<std::uint8_t>;

namespace detail {

// Per-tile grey-level mapping: clipped histogram, excess spread uniformly,
// CDF rescaled so the lowest occupied level maps to 0. Flat tiles map to
// themselves.
inline std::array<double, 256> clahe_tile_map(const GrayRaster& img, std::size_t r0, std::size_t r1, std::size_t c0,
                                              std::size_t c1, double clip_limit) {
  std::array<double, 256> hist{};
  for (std::size_t r = r0; r < r1; ++r) {
    for (std::size_t c = c0; c < c1; ++c) hist[img(r, c)] += 1.0;
  }
  std::array<double, 256> map{};
  const double n = static_cast<double>((r1 - r0) * (c1 - c0));
  int occupied = 0;
  for (double h : hist) occupied += h > 0.0 ? 1 : 0;
  if (occupied <= 1) {
    for (int v = 0; v < 256; ++v) map[v] = v;
    return map;
  }
  if (clip_limit > 0.0) {
    const double limit = std::max(1.0, clip_limit * n / 256.0);
    double excess = 0.0;
    for (double& h : hist) {
      if (h > limit) {
        excess += h - limit;
        h = limit;
      }
    }
    const double share = excess / 256.0;
    for (double& h : hist) h += share;
  }
  std::array<double, 256> cdf{};
  double acc = 0.0;
  for (int v = 0; v < 256; ++v) {
    acc += hist[v];
    cdf[v] = acc;
  }
  double cdf_min = 0.0;
  for (int v = 0; v < 256; ++v) {
    if (hist[v] > 0.0) {
      cdf_min = cdf[v];
      break;
    }
  }
  const double denom = acc - cdf_min;
  for (int v = 0; v < 256; ++v) {
    map[v] = denom > 0.0 ? std::clamp((cdf[v] - cdf_min) / denom, 0.0, 1.0) * 255.0 : v;
  }
  return map;
}

}  // namespace detail

/// Contrast-limited adaptive histogram equalisation. `clip_limit` is a
/// multiple of the mean bin count; 0 disables clipping. Tile mappings are
/// blended bilinearly between tile centres.
inline GrayRaster clahe(const GrayRaster& img, int tile_width, int tile_height, double clip_limit) {
  if (tile_width < 1 || tile_height < 1) throw InputError("CLAHE tile dimensions must be >= 1");
  if (clip_limit < 0.0) throw InputError("CLAHE clip limit must be >= 0");
  const std::size_t rows = img.rows(), cols = img.cols();
  if (rows == 0 || cols == 0) return img;
  const std::size_t ty = std::max<std::size_t>(1, rows / static_cast<std::size_t>(tile_height));
  const std::size_t tx = std::max<std::size_t>(1, cols / static_cast<std::size_t>(tile_width));
  const auto edge_r = [&](std::size_t i) { return i * rows / ty; };
  const auto edge_c = [&](std::size_t j) { return j * cols / tx; };

  std::vector<std::array<double, 256>> maps(ty * tx);
  std::vector<double> center_r(ty), center_c(tx);
  for (std::size_t i = 0; i < ty; ++i) {
    center_r[i] = 0.5 * static_cast<double>(edge_r(i) + edge_r(i + 1)) - 0.5;
    for (std::size_t j = 0; j < tx; ++j) {
      maps[i * tx + j] = detail::clahe_tile_map(img, edge_r(i), edge_r(i + 1), edge_c(j), edge_c(j + 1), clip_limit);
    }
  }
  for (std::size_t j = 0; j < tx; ++j) center_c[j] = 0.5 * static_cast<double>(edge_c(j) + edge_c(j + 1)) - 0.5;

  // Index of the tile centre at or before `pos` and the blend weight toward the next one.
  const auto locate = [](const std::vector<double>& centers, double pos) {
    if (centers.size() == 1 || pos <= centers.front()) return std::pair<std::size_t, double>{0, 0.0};
    if (pos >= centers.back()) return std::pair<std::size_t, double>{centers.size() - 1, 0.0};
    std::size_t k = 0;
    while (k + 1 < centers.size() && centers[k + 1] <= pos) ++k;
    return std::pair<std::size_t, double>{k, (pos - centers[k]) / (centers[k + 1] - centers[k])};
  };

  GrayRaster out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto [i0, wy] = locate(center_r, static_cast<double>(r));
    const std::size_t i1 = std::min(i0 + 1, ty - 1);
    for (std::size_t c = 0; c < cols; ++c) {
      const auto [j0, wx] = locate(center_c, static_cast<double>(c));
      const std::size_t j1 = std::min(j0 + 1, tx - 1);
      const std::uint8_t v = img(r, c);
      const double top = (1.0 - wx) * maps[i0 * tx + j0][v] + wx * maps[i0 * tx + j1][v];
      const double bottom = (1.0 - wx) * maps[i1 * tx + j0][v] + wx * maps[i1 * tx + j1][v];
      out(r, c) = static_cast<std::uint8_t>(std::lround(std::clamp((1.0 - wy) * top + wy * bottom, 0.0, 255.0)));
    }
  }
  return out;
}

/// Normalised Bayer threshold matrix with entries k / order^2.
struct ThresholdMap {
  int order = 0;
  Matrix values;
};

inline ThresholdMap bayer_matrix(int order) {
  if (order < 2 || order > 64 || (order & (order - 1)) != 0) {
    throw InputError("Bayer order must be a power of two in [2, 64], got " + std::to_string(order));
  }
  Grid<int> m(1, 1, 0);
  for (int n = 1; n < order; n *= 2) {
    Grid<int> next(static_cast<std::size_t>(2 * n), static_cast<std::size_t>(2 * n));
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const int v = 4 * m(y, x);
        next(y, x) = v;
        next(y, x + n) = v + 2;
        next(y + n, x) = v + 3;
        next(y + n, x + n) = v + 1;
      }
    }
    m = std::move(next);
  }
  ThresholdMap out{order, Matrix(m.rows(), m.cols())};
  const double scale = 1.0 / (static_cast<double>(order) * order);
  for (std::size_t i = 0; i < m.size(); ++i) out.values.values()[i] = m.values()[i] * scale;
  return out;
}

/// Index of the palette colour nearest to (r, g, b); ties go to the lowest index.
inline std::size_t nearest_palette(std::span<const Rgb> palette, double r, double g, double b) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < palette.size(); ++k) {
    const double dr = r - palette[k].r, dg = g - palette[k].g, db = b - palette[k].b;
    const double d = dr * dr + dg * dg + db * db;
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

/// Ordered-dither quantisation to a palette. Each channel is offset by
/// spread * (threshold - 0.5) before the nearest-colour lookup.
inline Grid<std::uint8_t> ordered_dither_quantize(const Frame& frame, std::span<const Rgb> palette, const ThresholdMap& map,
                                                  double spread) {
  if (palette.empty()) throw InputError("palette must not be empty");
  if (palette.size() > 256) throw InputError("palette larger than 256 colours");
  const auto n = static_cast<std::size_t>(map.order);
  Grid<std::uint8_t> out(static_cast<std::size_t>(frame.height()), static_cast<std::size_t>(frame.width()));
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      const double off = spread * (map.values(static_cast<std::size_t>(y) % n, static_cast<std::size_t>(x) % n) - 0.5);
      const Rgb p = frame.at(x, y);
      out(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
          static_cast<std::uint8_t>(nearest_palette(palette, p.r + off, p.g + off, p.b + off));
    }
  }
  return out;
}

}  // namespace avmir
