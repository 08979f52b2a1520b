#pragma once

// Psychoacoustic sonogram (Bark / dB / Phon / Sone) and the rhythm pattern
// feature family derived from it, plus MFCC and chroma.

#include <avmir/fft.hpp>

namespace avmir {

/// Mono PCM audio with samples in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  double sample_rate = 0.0;

  double duration() const noexcept {
    return sample_rate > 0.0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

/// Linear-interpolation resampling.
inline AudioClip resample_linear(const AudioClip& clip, double target_rate) {
  if (clip.sample_rate <= 0.0 || target_rate <= 0.0) throw InputError("sample rates must be positive");
  if (clip.sample_rate == target_rate || clip.samples.empty()) return {clip.samples, target_rate};
  const double ratio = clip.sample_rate / target_rate;
  const auto n = static_cast<std::size_t>(std::floor(static_cast<double>(clip.samples.size() - 1) / ratio)) + 1;
  AudioClip out{std::vector<double>(n), target_rate};
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = static_cast<double>(i) * ratio;
    const auto j = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(j);
    const double a = clip.samples[j];
    const double b = j + 1 < clip.samples.size() ? clip.samples[j + 1] : a;
    out.samples[i] = a + frac * (b - a);
  }
  return out;
}

/// Zwicker critical band edges in Hz (24 bands).
inline constexpr std::array<double, 25> kBarkEdges = {0,    100,  200,  300,  400,  510,  630,  770,  920,
                                                      1080, 1270, 1480, 1720, 2000, 2320, 2700, 3150, 3700,
                                                      4400, 5300, 6400, 7700, 9500, 12000, 15500};
inline constexpr std::size_t kBarkBands = 24;

inline double bark_centre(std::size_t band) { return 0.5 * (kBarkEdges[band] + kBarkEdges[band + 1]); }

/// Bark band of frequency f, or kBarkBands when above the last edge.
inline std::size_t bark_band_of(double f) {
  for (std::size_t b = 0; b < kBarkBands; ++b) {
    if (f >= kBarkEdges[b] && f < kBarkEdges[b + 1]) return b;
  }
  return kBarkBands;
}

namespace loudness {

// Equal-loudness contour parameters of ISO 226:2003, Table 1
// (frequency, exponent a_f, magnitude L_U, hearing threshold T_f).
inline constexpr std::array<double, 29> kIsoFreq = {20,  25,  31.5, 40,   50,   63,   80,   100,  125,  160,
                                                    200, 250, 315,  400,  500,  630,  800,  1000, 1250, 1600,
                                                    2000, 2500, 3150, 4000, 5000, 6300, 8000, 10000, 12500};
inline constexpr std::array<double, 29> kIsoAf = {0.532, 0.506, 0.480, 0.455, 0.432, 0.409, 0.387, 0.367, 0.349, 0.330,
                                                  0.315, 0.301, 0.288, 0.276, 0.267, 0.259, 0.253, 0.250, 0.246, 0.244,
                                                  0.243, 0.243, 0.243, 0.242, 0.242, 0.245, 0.254, 0.271, 0.301};
inline constexpr std::array<double, 29> kIsoLu = {-31.6, -27.2, -23.0, -19.1, -15.9, -13.0, -10.3, -8.1, -6.2, -4.5,
                                                  -3.1,  -2.0,  -1.1,  -0.4,  0.0,   0.3,   0.5,   0.0,  -2.7, -4.1,
                                                  -1.0,  1.7,   2.5,   1.2,   -2.1,  -7.1,  -11.2, -10.7, -3.1};
inline constexpr std::array<double, 29> kIsoTf = {78.5, 68.7, 59.5, 51.1, 44.0, 37.5, 31.5, 26.5, 22.1, 17.9,
                                                  14.4, 11.4, 8.6,  6.2,  4.4,  3.0,  2.2,  2.4,  3.5,  1.7,
                                                  -1.3, -4.2, -6.0, -5.4, -1.5, 6.0,  12.6, 13.9, 12.3};

struct ContourParams {
  double af;
  double lu;
  double tf;
};

/// Contour parameters at frequency f, linear in log-frequency, clamped at the table ends.
inline ContourParams contour_at(double f) {
  if (f <= kIsoFreq.front()) return {kIsoAf.front(), kIsoLu.front(), kIsoTf.front()};
  if (f >= kIsoFreq.back()) return {kIsoAf.back(), kIsoLu.back(), kIsoTf.back()};
  std::size_t i = 0;
  while (kIsoFreq[i + 1] < f) ++i;
  const double t = (std::log(f) - std::log(kIsoFreq[i])) / (std::log(kIsoFreq[i + 1]) - std::log(kIsoFreq[i]));
  const auto lerp = [t](double a, double b) { return a + t * (b - a); };
  return {lerp(kIsoAf[i], kIsoAf[i + 1]), lerp(kIsoLu[i], kIsoLu[i + 1]), lerp(kIsoTf[i], kIsoTf[i + 1])};
}

/// Loudness level (phon) of a tone at `spl` dB and contour parameters p.
inline double phon(double spl, const ContourParams& p) {
  const double bf = std::pow(0.4 * std::pow(10.0, (spl + p.lu) / 10.0 - 9.0), p.af) -
                    std::pow(0.4 * std::pow(10.0, (p.tf + p.lu) / 10.0 - 9.0), p.af) + 0.005135;
  if (bf <= 0.0) return 0.0;
  return std::max(0.0, 40.0 * std::log10(bf) + 94.0);
}

/// Phon to sone: doubling per 10 phon above 40, power law below.
inline double sone(double phon_level) {
  if (phon_level <= 0.0) return 0.0;
  if (phon_level >= 40.0) return std::pow(2.0, (phon_level - 40.0) / 10.0);
  return std::pow(phon_level / 40.0, 2.642);
}

}  // namespace loudness

struct SonogramOptions {
  std::size_t window = 0;  // 0: 512 at 22.05 kHz, 1024 at 44.1 kHz
  double overlap = 0.5;
  double db_floor = -72.0;
  double full_scale_spl = 96.0;  // SPL assigned to a 0 dBFS tone
};

struct Sonogram {
  Matrix power;  // bands x frames, 1.0 = full-scale sine
  Matrix db;     // dBFS, floored
  Matrix sone;   // bands x frames
  double frame_rate = 0.0;
  double sample_rate = 0.0;
  std::size_t window = 0;
  std::size_t hop = 0;
};

/// Analysis rate: 22.05 and 44.1 kHz are kept, anything else is resampled
/// to 22.05 kHz.
inline AudioClip analysis_clip(const AudioClip& clip) {
  if (clip.sample_rate == 22050.0 || clip.sample_rate == 44100.0) return clip;
  return resample_linear(clip, 22050.0);
}

inline std::size_t default_window(double sample_rate) { return sample_rate > 22050.0 ? 1024 : 512; }

inline Sonogram sonogram(const AudioClip& input, SonogramOptions opt = {}) {
  const AudioClip clip = analysis_clip(input);
  if (opt.window == 0) opt.window = default_window(clip.sample_rate);
  const std::size_t n = opt.window;
  if ((n & (n - 1)) != 0) throw InputError("sonogram window must be a power of two");
  if (opt.overlap < 0.0 || opt.overlap >= 1.0) throw InputError("overlap must be in [0, 1)");
  if (clip.samples.size() < n) throw InputError("clip too short");
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(n) * (1.0 - opt.overlap))));
  const std::size_t frames = 1 + (clip.samples.size() - n) / hop;

  const std::vector<double> win = hann_window(n);
  double win_energy = 0.0;
  for (double w : win) win_energy += w * w;
  const double norm = 4.0 / (static_cast<double>(n) * win_energy);

  std::vector<std::size_t> band_of(n / 2 + 1);
  for (std::size_t k = 0; k < band_of.size(); ++k) {
    band_of[k] = k == 0 ? kBarkBands : bark_band_of(static_cast<double>(k) * clip.sample_rate / static_cast<double>(n));
  }

  Sonogram s;
  s.sample_rate = clip.sample_rate;
  s.window = n;
  s.hop = hop;
  s.frame_rate = clip.sample_rate / static_cast<double>(hop);
  s.power = Matrix(kBarkBands, frames, 0.0);
  RealFft fft(n);
  std::vector<double> buf(n), pw(fft.bins());
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < n; ++i) buf[i] = clip.samples[t * hop + i] * win[i];
    fft.power(buf, pw);
    for (std::size_t k = 1; k < pw.size(); ++k) {
      if (band_of[k] < kBarkBands) s.power(band_of[k], t) += pw[k] * norm;
    }
  }

  s.db = Matrix(kBarkBands, frames);
  s.sone = Matrix(kBarkBands, frames);
  for (std::size_t b = 0; b < kBarkBands; ++b) {
    const loudness::ContourParams cp = loudness::contour_at(bark_centre(b));
    for (std::size_t t = 0; t < frames; ++t) {
      const double p = s.power(b, t);
      const double db = p > 0.0 ? std::max(opt.db_floor, 10.0 * std::log10(p)) : opt.db_floor;
      s.db(b, t) = db;
      s.sone(b, t) = db <= opt.db_floor ? 0.0 : loudness::sone(loudness::phon(db + opt.full_scale_spl, cp));
    }
  }
  return s;
}

/// Columns [first, first + count) of a bands x frames matrix.
inline Matrix slice_frames(const Matrix& m, std::size_t first, std::size_t count) {
  if (first + count > m.cols()) throw InputError("sonogram slice out of range");
  Matrix out(m.rows(), count);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < count; ++c) out(r, c) = m(r, first + c);
  }
  return out;
}

inline constexpr std::size_t kModulationBins = 60;
inline constexpr std::size_t kSevenStats = 7;

/// Fluctuation-strength weight, peak 1 at 4 Hz.
inline double fluctuation_weight(double f) {
  if (f <= 0.0) return 0.0;
  return 2.0 / (f / 4.0 + 4.0 / f);
}

/// 3-point moving average along both axes (edges average available neighbours).
inline Matrix smooth3(const Matrix& m) {
  const auto pass = [](const Matrix& in, bool along_cols) {
    Matrix out(in.rows(), in.cols());
    for (std::size_t r = 0; r < in.rows(); ++r) {
      for (std::size_t c = 0; c < in.cols(); ++c) {
        double s = 0.0;
        int cnt = 0;
        for (int d = -1; d <= 1; ++d) {
          const auto rr = static_cast<std::ptrdiff_t>(r) + (along_cols ? 0 : d);
          const auto cc = static_cast<std::ptrdiff_t>(c) + (along_cols ? d : 0);
          if (rr < 0 || cc < 0 || rr >= static_cast<std::ptrdiff_t>(in.rows()) || cc >= static_cast<std::ptrdiff_t>(in.cols())) continue;
          s += in(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
          ++cnt;
        }
        out(r, c) = s / cnt;
      }
    }
    return out;
  };
  return pass(pass(m, true), false);
}

/// Modulation magnitudes of each band's loudness series at the first 60
/// nonzero DFT frequencies, fluctuation-weighted and smoothed.
inline Matrix rhythm_pattern(const Matrix& segment, double frame_rate) {
  const std::size_t n = segment.cols();
  if (n < 2 * kModulationBins + 1) throw InputError("rhythm pattern segment too short");
  Matrix rp(segment.rows(), kModulationBins);
  std::vector<double> cs(n), sn(n);
  for (std::size_t k = 1; k <= kModulationBins; ++k) {
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = kTwoPi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      cs[t] = std::cos(ang);
      sn[t] = std::sin(ang);
    }
    const double w = fluctuation_weight(static_cast<double>(k) * frame_rate / static_cast<double>(n));
    for (std::size_t b = 0; b < segment.rows(); ++b) {
      double re = 0.0, im = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        re += segment(b, t) * cs[t];
        im -= segment(b, t) * sn[t];
      }
      rp(b, k - 1) = w * std::hypot(re, im);
    }
  }
  return smooth3(rp);
}

/// Modulation frequency (Hz) of rhythm-pattern column j for a segment of n frames.
inline double modulation_frequency(std::size_t column, std::size_t segment_frames, double frame_rate) {
  return static_cast<double>(column + 1) * frame_rate / static_cast<double>(segment_frames);
}

inline std::vector<double> rhythm_histogram(const Matrix& rp) {
  std::vector<double> rh(rp.cols(), 0.0);
  for (std::size_t b = 0; b < rp.rows(); ++b) {
    for (std::size_t j = 0; j < rp.cols(); ++j) rh[j] += rp(b, j);
  }
  return rh;
}

/// Seven statistics of each row.
inline Matrix row_stats(const Matrix& m) {
  Matrix out(m.rows(), kSevenStats);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto s = stats::seven(m.row(r));
    std::copy(s.begin(), s.end(), out.row(r).begin());
  }
  return out;
}

/// Statistical spectrum descriptor: seven statistics per band over time.
inline Matrix ssd(const Matrix& segment) {
  if (segment.cols() < 2) throw InputError("SSD needs at least 2 frames");
  return row_stats(segment);
}

/// Seven statistics of each modulation column across bands (60 x 7).
inline Matrix modvar(const Matrix& rp) {
  Matrix t(rp.cols(), rp.rows());
  for (std::size_t b = 0; b < rp.rows(); ++b) {
    for (std::size_t j = 0; j < rp.cols(); ++j) t(j, b) = rp(b, j);
  }
  return row_stats(t);
}

struct TrackFeatures {
  std::vector<double> rp;    // 1440, band-major
  std::vector<double> rh;    // 60
  std::vector<double> ssd;   // 168, band-major
  std::vector<double> mvd;   // 420, modulation-major
  std::vector<double> tssd;  // 1176, SSD-dimension-major
  std::vector<double> trh;   // 420, RH-dimension-major
  std::size_t segments_used = 0;
};

/// Sonogram frames spanned by `seconds` of audio.
inline std::size_t frames_for_seconds(const Sonogram& s, double seconds) {
  const auto samples = static_cast<std::size_t>(std::llround(seconds * s.sample_rate));
  if (samples < s.window) return 0;
  return 1 + (samples - s.window) / s.hop;
}

namespace detail {

// Seven statistics over a sequence of vectors, per dimension, dimension-major.
inline std::vector<double> temporal_stats(const std::vector<std::vector<double>>& seq) {
  const std::size_t d = seq.front().size();
  std::vector<double> out;
  out.reserve(d * kSevenStats);
  std::vector<double> col(seq.size());
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t t = 0; t < seq.size(); ++t) col[t] = seq[t][i];
    const auto s = stats::seven(col);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

inline std::vector<double> elementwise(const std::vector<std::vector<double>>& seq, bool use_median) {
  const std::size_t d = seq.front().size();
  std::vector<double> out(d);
  std::vector<double> col(seq.size());
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t t = 0; t < seq.size(); ++t) col[t] = seq[t][i];
    out[i] = use_median ? stats::median(col) : stats::mean(col);
  }
  return out;
}

}  // namespace detail

inline constexpr double kSegmentSeconds = 6.0;

/// Segment-wise features aggregated over non-overlapping 6 s segments.
inline TrackFeatures track_features(const Sonogram& s) {
  const std::size_t seg = frames_for_seconds(s, kSegmentSeconds);
  const std::size_t count = seg == 0 ? 0 : s.sone.cols() / seg;
  if (count == 0) throw InputError("clip shorter than one 6 s segment");
  std::size_t first = 0, last = count;
  if (count >= 4) {
    first = 1;
    last = count - 1;
  }
  std::vector<std::vector<double>> rps, rhs, ssds, mvds;
  for (std::size_t i = first; i < last; ++i) {
    const Matrix slice = slice_frames(s.sone, i * seg, seg);
    const Matrix rp = rhythm_pattern(slice, s.frame_rate);
    rps.push_back(rp.values());
    rhs.push_back(rhythm_histogram(rp));
    ssds.push_back(ssd(slice).values());
    mvds.push_back(modvar(rp).values());
  }
  TrackFeatures f;
  f.segments_used = rps.size();
  f.rp = detail::elementwise(rps, true);
  f.rh = detail::elementwise(rhs, true);
  f.ssd = detail::elementwise(ssds, false);
  f.mvd = detail::elementwise(mvds, false);
  f.tssd = detail::temporal_stats(ssds);
  f.trh = detail::temporal_stats(rhs);
  return f;
}

inline TrackFeatures track_features(const AudioClip& clip) {
  if (clip.duration() < kSegmentSeconds - 1e-9) throw InputError("clip shorter than 6 s");
  return track_features(sonogram(clip));
}

// ------------------------------------------------------------------- MFCC

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

struct MfccOptions {
  std::size_t coefficients = 13;
  std::size_t window = 512;
  double overlap = 0.0;
  std::size_t filters = 26;
  double log_floor = 1e-10;
};

/// Triangular mel filterbank, filters x (window/2 + 1).
inline Matrix mel_filterbank(std::size_t filters, std::size_t window, double sample_rate) {
  const std::size_t bins = window / 2 + 1;
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(filters + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(filters + 1));
  Matrix fb(filters, bins, 0.0);
  for (std::size_t m = 0; m < filters; ++m) {
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(window);
      if (f > edges[m] && f <= edges[m + 1]) {
        fb(m, k) = (f - edges[m]) / (edges[m + 1] - edges[m]);
      } else if (f > edges[m + 1] && f < edges[m + 2]) {
        fb(m, k) = (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1]);
      }
    }
  }
  return fb;
}

/// Per-frame MFCCs (frames x coefficients): Hann power spectrum, mel
/// filterbank, natural log, orthonormal DCT-II.
inline Matrix mfcc(const AudioClip& clip, const MfccOptions& opt = {}) {
  const std::size_t n = opt.window;
  if (clip.sample_rate <= 0.0) throw InputError("sample rate must be positive");
  if (clip.samples.size() < n) throw InputError("clip shorter than one MFCC window");
  if (opt.coefficients > opt.filters) throw InputError("more cepstral coefficients than mel filters");
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(n) * (1.0 - opt.overlap))));
  const std::size_t frames = 1 + (clip.samples.size() - n) / hop;
  const Matrix fb = mel_filterbank(opt.filters, n, clip.sample_rate);
  const std::vector<double> win = hann_window(n);
  RealFft fft(n);
  std::vector<double> buf(n), pw(fft.bins()), logmel(opt.filters);
  Matrix out(frames, opt.coefficients);
  const double nf = static_cast<double>(opt.filters);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < n; ++i) buf[i] = clip.samples[t * hop + i] * win[i];
    fft.power(buf, pw);
    for (std::size_t m = 0; m < opt.filters; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < pw.size(); ++k) e += fb(m, k) * pw[k];
      logmel[m] = std::log(e + opt.log_floor);
    }
    for (std::size_t c = 0; c < opt.coefficients; ++c) {
      double s = 0.0;
      for (std::size_t m = 0; m < opt.filters; ++m) {
        s += logmel[m] * std::cos(kPi * static_cast<double>(c) * (static_cast<double>(m) + 0.5) / nf);
      }
      out(t, c) = s * std::sqrt((c == 0 ? 1.0 : 2.0) / nf);
    }
  }
  return out;
}

// ----------------------------------------------------------------- Chroma

struct ChromaOptions {
  std::size_t window = 4096;
  std::size_t hop = 2048;
  double min_hz = 55.0;
  double max_hz = 5000.0;
  double silence_energy = 1e-10;
};

struct ChromaResult {
  Matrix values;                   // frames x 12, pitch classes C..B
  std::vector<char> significant;   // false for silent frames (uniform vector)
};

/// Pitch class (C = 0 ... B = 11) of frequency f with A4 = 440 Hz.
inline int pitch_class(double f) {
  const long semis = std::lround(12.0 * std::log2(f / 440.0));
  return static_cast<int>(((semis + 9) % 12 + 12) % 12);
}

inline ChromaResult chroma(const AudioClip& clip, const ChromaOptions& opt = {}) {
  const std::size_t n = opt.window;
  if (clip.samples.size() < n) throw InputError("clip shorter than one chroma window");
  const std::size_t frames = 1 + (clip.samples.size() - n) / std::max<std::size_t>(1, opt.hop);
  const std::vector<double> win = hann_window(n);
  RealFft fft(n);
  std::vector<int> pc(fft.bins(), -1);
  for (std::size_t k = 1; k < pc.size(); ++k) {
    const double f = static_cast<double>(k) * clip.sample_rate / static_cast<double>(n);
    if (f >= opt.min_hz && f <= opt.max_hz) pc[k] = pitch_class(f);
  }
  std::vector<double> buf(n), pw(fft.bins());
  ChromaResult out{Matrix(frames, 12, 0.0), std::vector<char>(frames, 0)};
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < n; ++i) buf[i] = clip.samples[t * opt.hop + i] * win[i];
    fft.power(buf, pw);
    double total = 0.0;
    for (std::size_t k = 0; k < pw.size(); ++k) {
      if (pc[k] >= 0) {
        out.values(t, static_cast<std::size_t>(pc[k])) += pw[k];
        total += pw[k];
      }
    }
    if (total > opt.silence_energy * static_cast<double>(n)) {
      for (double& v : out.values.row(t)) v /= total;
      out.significant[t] = 1;
    } else {
      for (double& v : out.values.row(t)) v = 1.0 / 12.0;
    }
  }
  return out;
}

}  // namespace avmir
