#pragma once

// Statistical-moment aggregation of vector sequences, the segment-level
// presets EN0..EN5 / TEN, and per-video aggregation of frame descriptors.

#include <avmir/audio_features.hpp>
#include <avmir/visual_features.hpp>

#include <cctype>
#include <optional>
#include <string_view>

namespace avmir {

enum class Moment { Mean, Median, Variance, StdDev, Min, Max, Range, Skewness, Kurtosis };

inline std::string_view moment_name(Moment m) {
  switch (m) {
    case Moment::Mean: return "mean";
    case Moment::Median: return "median";
    case Moment::Variance: return "variance";
    case Moment::StdDev: return "std";
    case Moment::Min: return "min";
    case Moment::Max: return "max";
    case Moment::Range: return "range";
    case Moment::Skewness: return "skewness";
    case Moment::Kurtosis: return "kurtosis";
  }
  return "?";
}

inline Moment parse_moment(std::string_view s) {
  for (Moment m : {Moment::Mean, Moment::Median, Moment::Variance, Moment::StdDev, Moment::Min, Moment::Max,
                   Moment::Range, Moment::Skewness, Moment::Kurtosis}) {
    if (moment_name(m) == s) return m;
  }
  if (s == "var") return Moment::Variance;
  if (s == "skew") return Moment::Skewness;
  if (s == "kurt") return Moment::Kurtosis;
  if (s == "stddev") return Moment::StdDev;
  throw InputError("unknown moment '" + std::string(s) + "'");
}

/// Ordered, duplicate-free list of moments.
class MomentSpec {
 public:
  MomentSpec(std::initializer_list<Moment> moments) : MomentSpec(std::vector<Moment>(moments)) {}
  explicit MomentSpec(std::vector<Moment> moments) : moments_(std::move(moments)) {
    if (moments_.empty()) throw InputError("moment spec must not be empty");
    for (std::size_t i = 0; i < moments_.size(); ++i) {
      for (std::size_t j = i + 1; j < moments_.size(); ++j) {
        if (moments_[i] == moments_[j]) throw InputError("duplicate moment '" + std::string(moment_name(moments_[i])) + "'");
      }
    }
  }

  std::size_t size() const noexcept { return moments_.size(); }
  const std::vector<Moment>& moments() const noexcept { return moments_; }
  auto begin() const noexcept { return moments_.begin(); }
  auto end() const noexcept { return moments_.end(); }

  /// The eight temporal moments used by TEN / EN4 / EN5.
  static MomentSpec eight() {
    return {Moment::Mean, Moment::Median, Moment::Variance, Moment::Min,
            Moment::Max,  Moment::Range,  Moment::Skewness, Moment::Kurtosis};
  }

  /// The seven statistics applied to per-frame visual descriptors.
  static MomentSpec seven() {
    return {Moment::Min, Moment::Max, Moment::Mean, Moment::Median, Moment::Variance, Moment::Skewness, Moment::Kurtosis};
  }

 private:
  std::vector<Moment> moments_;
};

/// Moments of a single scalar sequence, in spec order.
inline std::vector<double> scalar_moments(std::span<const double> x, const MomentSpec& spec) {
  if (x.empty()) throw InputError("cannot aggregate an empty sequence");
  const stats::CentralMoments cm = stats::central_moments(x);
  const bool flat = cm.constant || cm.m2 <= 0.0;
  const double lo = stats::min(x), hi = stats::max(x);
  std::vector<double> out;
  out.reserve(spec.size());
  for (Moment m : spec) {
    switch (m) {
      case Moment::Mean: out.push_back(flat ? x.front() : stats::mean(x)); break;
      case Moment::Median: out.push_back(stats::median(x)); break;
      case Moment::Variance: out.push_back(cm.m2); break;
      case Moment::StdDev: out.push_back(std::sqrt(cm.m2)); break;
      case Moment::Min: out.push_back(lo); break;
      case Moment::Max: out.push_back(hi); break;
      case Moment::Range: out.push_back(hi - lo); break;
      case Moment::Skewness: out.push_back(flat ? 0.0 : cm.m3 / std::pow(cm.m2, 1.5)); break;
      case Moment::Kurtosis: out.push_back(flat ? 0.0 : cm.m4 / (cm.m2 * cm.m2)); break;
    }
  }
  return out;
}

/// Per-dimension moments of a sequence (rows = time steps), concatenated
/// dimension-major: d0's moments, then d1's, ...
inline std::vector<double> moments(const Matrix& seq, const MomentSpec& spec) {
  if (seq.rows() == 0) throw InputError("cannot aggregate an empty sequence");
  std::vector<double> out;
  out.reserve(seq.cols() * spec.size());
  for (std::size_t c = 0; c < seq.cols(); ++c) {
    const std::vector<double> col = seq.column(c);
    const std::vector<double> m = scalar_moments(col, spec);
    out.insert(out.end(), m.begin(), m.end());
  }
  return out;
}

/// Stack equal-length vectors into a sequence matrix.
inline Matrix stack_rows(std::span<const std::vector<double>> rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) throw InputError("sequence rows have differing lengths");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

/// Segment-level descriptors of one track.
struct SegmentBundle {
  Matrix timbre;                            // segments x 12
  Matrix pitches;                           // segments x 12
  std::vector<double> loudness_max;         // dB
  std::vector<double> loudness_max_time;    // seconds from segment start
  std::vector<double> segment_length;       // seconds

  std::size_t segments() const noexcept { return loudness_max.size(); }

  void validate() const {
    const std::size_t n = segments();
    if (n == 0) throw InputError("segment bundle is empty");
    if (timbre.rows() != n || pitches.rows() != n || loudness_max_time.size() != n || segment_length.size() != n) {
      throw InputError("segment bundle sequences differ in length");
    }
    if (timbre.cols() != 12 || pitches.cols() != 12) throw InputError("timbre and pitch vectors must be 12-dimensional");
    for (double l : segment_length) {
      if (!(l > 0.0)) throw InputError("segment lengths must be positive");
    }
  }
};

enum class Preset { EN0, EN1, EN2, EN3, EN4, EN5, TEN };

inline Preset parse_preset(std::string_view s) {
  static constexpr std::pair<std::string_view, Preset> table[] = {
      {"EN0", Preset::EN0}, {"EN1", Preset::EN1}, {"EN2", Preset::EN2}, {"EN3", Preset::EN3},
      {"EN4", Preset::EN4}, {"EN5", Preset::EN5}, {"TEN", Preset::TEN}};
  for (auto [name, p] : table) {
    if (name.size() == s.size() && std::equal(name.begin(), name.end(), s.begin(),
                                              [](char a, char b) { return a == std::toupper(static_cast<unsigned char>(b)); })) {
      return p;
    }
  }
  throw InputError("unknown preset '" + std::string(s) + "'");
}

inline std::size_t preset_dimension(Preset p) {
  switch (p) {
    case Preset::EN0: return 12;
    case Preset::EN1: return 24;
    case Preset::EN2: return 24;
    case Preset::EN3: return 90;
    case Preset::EN4: return 96;
    case Preset::EN5: return 192;
    case Preset::TEN: return 216;
  }
  return 0;
}

struct PresetResult {
  std::vector<double> values;
  bool degenerate = false;  // EN3 on a single segment: covariance undefined, zeros emitted
};

namespace detail {

inline void append(std::vector<double>& out, const std::vector<double>& v) { out.insert(out.end(), v.begin(), v.end()); }

// Mean followed by the row-major upper triangle (with diagonal) of the
// population covariance.
inline std::vector<double> mean_and_covariance(const Matrix& x) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> mu(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) mu[c] += x(r, c);
  }
  for (double& m : mu) m /= static_cast<double>(n);
  std::vector<double> out = mu;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += (x(r, i) - mu[i]) * (x(r, j) - mu[j]);
      out.push_back(s / static_cast<double>(n));
    }
  }
  return out;
}

}  // namespace detail

inline PresetResult preset(const SegmentBundle& bundle, Preset which) {
  bundle.validate();
  const MomentSpec mean_only{Moment::Mean};
  const MomentSpec mean_var{Moment::Mean, Moment::Variance};
  const MomentSpec eight = MomentSpec::eight();
  PresetResult r;
  switch (which) {
    case Preset::EN0: r.values = moments(bundle.timbre, mean_only); break;
    case Preset::EN1: r.values = moments(bundle.timbre, mean_var); break;
    case Preset::EN2: r.values = moments(bundle.pitches, mean_var); break;
    case Preset::EN3:
      r.values = detail::mean_and_covariance(bundle.timbre);
      r.degenerate = bundle.segments() < 2;
      break;
    case Preset::EN4: r.values = moments(bundle.timbre, eight); break;
    case Preset::EN5:
      r.values = moments(bundle.timbre, eight);
      detail::append(r.values, moments(bundle.pitches, eight));
      break;
    case Preset::TEN: {
      r.values = moments(bundle.timbre, eight);
      detail::append(r.values, moments(bundle.pitches, eight));
      detail::append(r.values, scalar_moments(bundle.loudness_max, eight));
      detail::append(r.values, scalar_moments(bundle.loudness_max_time, eight));
      detail::append(r.values, scalar_moments(bundle.segment_length, eight));
      break;
    }
  }
  if (r.values.size() != preset_dimension(which)) throw InvariantError("preset produced an unexpected dimension");
  return r;
}

struct BundleOptions {
  double segment_seconds = 1.0;
  double loudness_floor_db = -72.0;
};

/// Fixed-length segmentation of a clip into a SegmentBundle: timbre = mean
/// of the first 12 MFCCs, pitches = mean chroma, loudness max = peak level in
/// dBFS (floored), loudness-max time = offset of the peak. The remainder of
/// the clip is merged into the final segment.
inline SegmentBundle segment_bundle_from_audio(const AudioClip& clip, const BundleOptions& opt = {}) {
  if (clip.sample_rate <= 0.0) throw InputError("sample rate must be positive");
  if (clip.duration() < 2.0 - 1e-9) throw InputError("clip shorter than 2 s");
  const auto seg_len = static_cast<std::size_t>(std::llround(opt.segment_seconds * clip.sample_rate));
  if (seg_len < 2) throw InputError("segment length too small");
  const std::size_t count = std::max<std::size_t>(1, clip.samples.size() / seg_len);
  SegmentBundle b;
  b.timbre = Matrix(count, 12);
  b.pitches = Matrix(count, 12);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t begin = s * seg_len;
    const std::size_t end = s + 1 == count ? clip.samples.size() : begin + seg_len;
    AudioClip part{std::vector<double>(clip.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                                       clip.samples.begin() + static_cast<std::ptrdiff_t>(end)),
                   clip.sample_rate};

    std::size_t win = 512;
    while (win > part.samples.size()) win /= 2;
    MfccOptions mo;
    mo.window = win;
    const Matrix mf = mfcc(part, mo);
    for (std::size_t c = 0; c < 12; ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < mf.rows(); ++t) acc += mf(t, c);
      b.timbre(s, c) = acc / static_cast<double>(mf.rows());
    }

    ChromaOptions co;
    while (co.window > part.samples.size()) co.window /= 2;
    co.hop = co.window / 2;
    const ChromaResult ch = chroma(part, co);
    for (std::size_t c = 0; c < 12; ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < ch.values.rows(); ++t) acc += ch.values(t, c);
      b.pitches(s, c) = acc / static_cast<double>(ch.values.rows());
    }

    std::size_t peak_at = 0;
    double peak = 0.0;
    for (std::size_t i = 0; i < part.samples.size(); ++i) {
      if (std::abs(part.samples[i]) > peak) {
        peak = std::abs(part.samples[i]);
        peak_at = i;
      }
    }
    b.loudness_max.push_back(peak > 0.0 ? std::max(opt.loudness_floor_db, 20.0 * std::log10(peak)) : opt.loudness_floor_db);
    b.loudness_max_time.push_back(static_cast<double>(peak_at) / clip.sample_rate);
    b.segment_length.push_back(static_cast<double>(part.samples.size()) / clip.sample_rate);
  }
  return b;
}

// ------------------------------------------------------- Video aggregation

enum class VisualFeature { Gcs, Gev, Cf, Cn, Ic, Waf, Lfp };

inline std::string_view visual_feature_name(VisualFeature f) {
  switch (f) {
    case VisualFeature::Gcs: return "gcs";
    case VisualFeature::Gev: return "gev";
    case VisualFeature::Cf: return "cf";
    case VisualFeature::Cn: return "cn";
    case VisualFeature::Ic: return "ic";
    case VisualFeature::Waf: return "waf";
    case VisualFeature::Lfp: return "lfp";
  }
  return "?";
}

/// Comma-separated feature list, order preserved.
inline std::vector<VisualFeature> parse_visual_features(std::string_view list) {
  std::vector<VisualFeature> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = std::min(list.find(',', start), list.size());
    const std::string_view tok = list.substr(start, comma - start);
    start = comma + 1;
    if (tok.empty()) continue;
    bool found = false;
    for (auto f : {VisualFeature::Gcs, VisualFeature::Gev, VisualFeature::Cf, VisualFeature::Cn, VisualFeature::Ic,
                   VisualFeature::Waf, VisualFeature::Lfp}) {
      if (tok == visual_feature_name(f)) {
        if (std::find(out.begin(), out.end(), f) != out.end()) throw InputError("duplicate visual feature '" + std::string(tok) + "'");
        out.push_back(f);
        found = true;
      }
    }
    if (!found) throw InputError("unknown visual feature '" + std::string(tok) + "'");
  }
  if (out.empty()) throw InputError("no visual features selected");
  return out;
}

inline std::size_t frame_feature_dimension(VisualFeature f) {
  switch (f) {
    case VisualFeature::Gcs: return dims::kGcs;
    case VisualFeature::Gev: return dims::kGev;
    case VisualFeature::Cf: return dims::kColorfulness;
    case VisualFeature::Cn: return dims::kColorNames;
    case VisualFeature::Ic: return dims::kItten;
    case VisualFeature::Waf: return dims::kWaf;
    case VisualFeature::Lfp: return 0;
  }
  return 0;
}

struct VisualOptions {
  bool strip_letterbox = true;
  LetterboxOptions letterbox;
  ColorNameOptions color_names;
  int colorfulness_partitions = 4;
  SegmentOptions segmentation;
  LfpPreset lfp_preset = LfpPreset::Bands80;
  LfpOptions lfp;
};

/// Per-frame descriptors for every selected feature except LFP.
inline std::vector<FrameFeature> frame_features(const Frame& input, std::span<const VisualFeature> features,
                                                const VisualOptions& opt = {}) {
  const Frame frame = opt.strip_letterbox ? strip_letterbox(input, opt.letterbox) : input;
  std::optional<IhlsFrame> ihls;
  std::optional<LchFrame> lch;
  const auto get_ihls = [&]() -> const IhlsFrame& {
    if (!ihls) ihls = rgb_to_ihls(frame);
    return *ihls;
  };
  const auto get_lch = [&]() -> const LchFrame& {
    if (!lch) lch = rgb_to_lch(frame);
    return *lch;
  };
  std::vector<FrameFeature> out;
  for (VisualFeature f : features) {
    FrameFeature ff{std::string(visual_feature_name(f)), {}};
    switch (f) {
      case VisualFeature::Gcs: {
        const auto g = gcs(get_ihls()).values;
        ff.values.assign(g.begin(), g.end());
        break;
      }
      case VisualFeature::Gev: {
        const auto g = gev(get_ihls());
        ff.values.assign(g.begin(), g.end());
        break;
      }
      case VisualFeature::Cf: ff.values = {colorfulness(frame, opt.colorfulness_partitions).score}; break;
      case VisualFeature::Cn: {
        const auto c = color_names(frame, opt.color_names);
        ff.values.assign(c.begin(), c.end());
        break;
      }
      case VisualFeature::Ic: {
        const auto c = itten_contrasts(segment_frame(get_lch(), opt.segmentation));
        ff.values.assign(c.begin(), c.end());
        break;
      }
      case VisualFeature::Waf: {
        const auto w = waf(get_lch(), blur_measure(luminance_raster(frame)));
        ff.values.assign(w.begin(), w.end());
        break;
      }
      case VisualFeature::Lfp: continue;
    }
    out.push_back(std::move(ff));
  }
  return out;
}

/// Streams frames of one video and produces the track vector: seven moments
/// (min, max, mean, median, variance, skewness, kurtosis) per frame-feature
/// dimension, feature by feature, followed by the LFP block when selected.
class VideoAggregator {
 public:
  VideoAggregator(std::vector<VisualFeature> features, VisualOptions opt = {})
      : features_(std::move(features)), opt_(std::move(opt)) {
    for (VisualFeature f : features_) {
      if (f != VisualFeature::Lfp) rows_.emplace_back();
    }
  }

  void add(const Frame& frame) {
    const auto ff = frame_features(frame, features_, opt_);
    for (std::size_t i = 0; i < ff.size(); ++i) rows_[i].push_back(ff[i].values);
    if (wants_lfp()) {
      const Frame f = opt_.strip_letterbox ? strip_letterbox(frame, opt_.letterbox) : frame;
      lightness_.push_back(lightness_histogram(rgb_to_lch(f), 24));
    }
    ++frames_;
  }

  std::size_t frames() const noexcept { return frames_; }

  std::vector<double> finish(double fps) const {
    if (frames_ == 0) throw InputError("video has no frames");
    std::vector<double> out;
    const MomentSpec seven = MomentSpec::seven();
    for (const auto& seq : rows_) {
      const auto m = moments(stack_rows(seq), seven);
      out.insert(out.end(), m.begin(), m.end());
    }
    if (wants_lfp()) {
      const auto l = lfp_feature(stack_rows(lightness_), fps, opt_.lfp_preset, opt_.lfp);
      out.insert(out.end(), l.begin(), l.end());
    }
    return out;
  }

  /// Column names matching finish(): <feature>_<k>_<moment>, then lfp_<k>.
  std::vector<std::string> schema(double fps) const {
    std::vector<std::string> names;
    for (VisualFeature f : features_) {
      if (f == VisualFeature::Lfp) continue;
      for (std::size_t k = 0; k < frame_feature_dimension(f); ++k) {
        for (Moment m : MomentSpec::seven()) {
          names.push_back(std::string(visual_feature_name(f)) + "_" + std::to_string(k) + "_" + std::string(moment_name(m)));
        }
      }
    }
    if (wants_lfp()) {
      for (std::size_t k = 0; k < lfp_dimension(opt_.lfp_preset, fps, opt_.lfp); ++k) names.push_back("lfp_" + std::to_string(k));
    }
    return names;
  }

  /// Per-frame rows of one selected feature (for CSV dumps).
  const std::vector<std::vector<double>>& frame_rows(std::size_t feature_index) const { return rows_.at(feature_index); }

 private:
  bool wants_lfp() const { return std::find(features_.begin(), features_.end(), VisualFeature::Lfp) != features_.end(); }

  std::vector<VisualFeature> features_;
  VisualOptions opt_;
  std::vector<std::vector<std::vector<double>>> rows_;
  std::vector<std::vector<double>> lightness_;
  std::size_t frames_ = 0;
};

/// Aggregated dimension of a feature selection.
inline std::size_t video_feature_dimension(std::span<const VisualFeature> features, LfpPreset preset, double fps,
                                           const LfpOptions& lfp = {}) {
  std::size_t d = 0;
  for (VisualFeature f : features) d += f == VisualFeature::Lfp ? lfp_dimension(preset, fps, lfp) : 7 * frame_feature_dimension(f);
  return d;
}

}  // namespace avmir
