#include <avmir/audio_features.hpp>

#include <gtest/gtest.h>

#include <complex>

#include "test_support.hpp"

using namespace avmir;

namespace {

Sonogram sone_only(Matrix sone, double frame_rate) {
  Sonogram s;
  s.sone = std::move(sone);
  s.frame_rate = frame_rate;
  s.sample_rate = 22050.0;
  s.window = 512;
  s.hop = 256;
  return s;
}

constexpr std::size_t kSegFrames = 515;  // 6 s at 22.05 kHz, window 512, hop 256
constexpr double kFrameRate = 22050.0 / 256.0;

}  // namespace

TEST(Sonogram, SilenceSitsAtFloor) {
  AudioClip c;
  c.sample_rate = 22050.0;
  c.samples.assign(22050, 0.0);
  const Sonogram s = sonogram(c);
  EXPECT_EQ(s.sone.rows(), kBarkBands);
  for (double v : s.sone.values()) EXPECT_EQ(v, 0.0);
  for (double v : s.db.values()) EXPECT_EQ(v, -72.0);
}

TEST(Sonogram, LowToneLandsInLowestBands) {
  const Sonogram s = sonogram(fixture::sine(100.0, 1.0, 22050.0, 1.0));
  std::vector<double> band(kBarkBands, 0.0);
  for (std::size_t b = 0; b < kBarkBands; ++b) {
    for (std::size_t t = 0; t < s.power.cols(); ++t) band[b] += s.power(b, t);
  }
  const auto peak = static_cast<std::size_t>(std::max_element(band.begin(), band.end()) - band.begin());
  EXPECT_LE(peak, 1u);
  for (std::size_t b = 4; b < kBarkBands; ++b) EXPECT_LT(10.0 * std::log10(band[b] / band[peak] + 1e-300), -30.0);
}

TEST(Sonogram, BandPowerMatchesDirectDft) {
  Rng rng(1);
  const AudioClip c = fixture::noise(rng, 0.1);
  const Sonogram s = sonogram(c);
  const auto win = hann_window(512);
  double wsum = 0.0;
  for (double w : win) wsum += w * w;
  const std::size_t t = 3;
  std::vector<double> oracle(kBarkBands, 0.0);
  for (std::size_t k = 1; k <= 256; ++k) {
    std::complex<double> x = 0.0;
    for (std::size_t i = 0; i < 512; ++i) x += c.samples[t * 256 + i] * win[i] * std::polar(1.0, -kTwoPi * double(k * i) / 512.0);
    const double f = static_cast<double>(k) * 22050.0 / 512.0;
    const std::size_t b = bark_band_of(f);
    if (b < kBarkBands) oracle[b] += std::norm(x) * 4.0 / (512.0 * wsum);
  }
  for (std::size_t b = 0; b < kBarkBands; ++b) EXPECT_NEAR(s.power(b, t), oracle[b], 1e-9 * (1.0 + oracle[b]));
}

TEST(Sonogram, DoublingAmplitudeAddsSixDecibels) {
  Rng rng(2);
  AudioClip a = fixture::noise(rng, 0.5, 22050.0, 0.1);
  AudioClip b = a;
  for (double& v : b.samples) v *= 2.0;
  const Sonogram sa = sonogram(a), sb = sonogram(b);
  int checked = 0;
  for (std::size_t i = 0; i < sa.db.size(); ++i) {
    if (sa.db.values()[i] > -60.0) {
      EXPECT_NEAR(sb.db.values()[i] - sa.db.values()[i], 20.0 * std::log10(2.0), 1e-9);
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(Sonogram, ShortClipThrows) {
  AudioClip c;
  c.sample_rate = 22050.0;
  c.samples.assign(100, 0.0);
  try {
    sonogram(c);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_STREQ(e.what(), "clip too short");
  }
}

TEST(Sonogram, SoneIsNonNegative) {
  Rng rng(3);
  const Sonogram s = sonogram(fixture::noise(rng, 0.5, 44100.0));
  EXPECT_EQ(s.window, 1024u);
  for (double v : s.sone.values()) EXPECT_GE(v, 0.0);
}

TEST(Sonogram, SixSecondSegmentSpans515Frames) {
  const Sonogram s = sonogram(fixture::sine(440.0, 7.0));
  EXPECT_EQ(frames_for_seconds(s, 6.0), kSegFrames);
}

TEST(RhythmPattern, ConstantInputIsZero) {
  const Matrix rp = rhythm_pattern(Matrix(24, kSegFrames, 3.0), kFrameRate);
  EXPECT_EQ(rp.rows(), 24u);
  EXPECT_EQ(rp.cols(), 60u);
  for (double v : rp.values()) EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(RhythmPattern, FourHertzModulationPeaks) {
  Matrix seg(24, kSegFrames, 0.0);
  for (std::size_t t = 0; t < kSegFrames; ++t) seg(7, t) = 1.0 + std::sin(kTwoPi * 4.0 * static_cast<double>(t) / kFrameRate);
  const Matrix rp = rhythm_pattern(seg, kFrameRate);
  std::size_t arg = 0;
  for (std::size_t j = 0; j < 60; ++j) {
    if (rp(7, j) > rp(7, arg)) arg = j;
  }
  const double step = kFrameRate / static_cast<double>(kSegFrames);
  EXPECT_LE(std::abs(modulation_frequency(arg, kSegFrames, kFrameRate) - 4.0), step + 1e-9);
  EXPECT_DOUBLE_EQ(fluctuation_weight(4.0), 1.0);
  EXPECT_LT(fluctuation_weight(1.0), 1.0);
}

TEST(RhythmPattern, MatchesWeightedDftOracle) {
  Rng rng(4);
  Matrix seg(24, kSegFrames);
  for (double& v : seg.values()) v = rng.uniform(0.0, 5.0);
  const Matrix rp = rhythm_pattern(seg, kFrameRate);
  Matrix raw(24, 60);
  for (std::size_t b = 0; b < 24; ++b) {
    for (std::size_t k = 1; k <= 60; ++k) {
      std::complex<double> x = 0.0;
      for (std::size_t t = 0; t < kSegFrames; ++t) x += seg(b, t) * std::polar(1.0, -kTwoPi * double(k * t) / double(kSegFrames));
      raw(b, k - 1) = std::abs(x) * fluctuation_weight(double(k) * kFrameRate / double(kSegFrames));
    }
  }
  // Interior point: 3x3 box average of the weighted magnitudes.
  for (std::size_t b : {5u, 12u}) {
    for (std::size_t j : {10u, 33u}) {
      double s = 0.0;
      for (int db = -1; db <= 1; ++db) {
        for (int dj = -1; dj <= 1; ++dj) s += raw(b + db, j + dj);
      }
      EXPECT_NEAR(rp(b, j), s / 9.0, 1e-8 * s);
    }
  }
}

TEST(RhythmHistogram, ColumnSums) {
  Matrix rp(24, 60, 0.0);
  EXPECT_EQ(rhythm_histogram(rp), std::vector<double>(60, 0.0));
  rp(4, 17) = 2.5;
  const auto rh = rhythm_histogram(rp);
  for (std::size_t j = 0; j < 60; ++j) EXPECT_EQ(rh[j], j == 17 ? 2.5 : 0.0);
  Rng rng(5);
  for (double& v : rp.values()) v = rng.uniform();
  const auto r2 = rhythm_histogram(rp);
  EXPECT_NEAR(std::accumulate(r2.begin(), r2.end(), 0.0), std::accumulate(rp.values().begin(), rp.values().end(), 0.0), 1e-9);
}

TEST(Ssd, DegenerateAndHandComputed) {
  Matrix seg(24, 4, 2.0);
  for (std::size_t t = 0; t < 4; ++t) seg(0, t) = static_cast<double>(t + 1);
  const Matrix s = ssd(seg);
  const std::vector<double> expected0{1, 4, 2.5, 2.5, 1.25, 0};
  for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(s(0, k), expected0[k], 1e-12);
  const std::vector<double> expected1{2, 2, 2, 2, 0, 0, 0};
  for (std::size_t k = 0; k < 7; ++k) EXPECT_EQ(s(1, k), expected1[k]);
  EXPECT_EQ(s.size(), 168u);
  EXPECT_THROW(ssd(Matrix(24, 1)), InputError);
}

TEST(Ssd, MatchesBruteForcePerBand) {
  Rng rng(6);
  Matrix seg(24, 50);
  for (double& v : seg.values()) v = rng.uniform(0.0, 10.0);
  const Matrix s = ssd(seg);
  for (std::size_t b = 0; b < 24; ++b) {
    std::vector<double> x(seg.row(b).begin(), seg.row(b).end());
    double mu = 0.0;
    for (double v : x) mu += v / 50.0;
    double var = 0.0;
    for (double v : x) var += (v - mu) * (v - mu) / 50.0;
    std::sort(x.begin(), x.end());
    EXPECT_NEAR(s(b, 0), x.front(), 1e-9);
    EXPECT_NEAR(s(b, 1), x.back(), 1e-9);
    EXPECT_NEAR(s(b, 2), mu, 1e-9);
    EXPECT_NEAR(s(b, 3), 0.5 * (x[24] + x[25]), 1e-9);
    EXPECT_NEAR(s(b, 4), var, 1e-9);
  }
}

TEST(ModVar, ShapeAndDegenerateColumns) {
  const Matrix z = modvar(Matrix(24, 60, 0.0));
  EXPECT_EQ(z.size(), 420u);
  for (double v : z.values()) EXPECT_EQ(v, 0.0);
  Matrix rp(24, 60, 1.0);
  for (std::size_t b = 0; b < 24; ++b) rp(b, 3) = 0.75;
  const Matrix m = modvar(rp);
  const std::vector<double> expected{0.75, 0.75, 0.75, 0.75, 0, 0, 0};
  for (std::size_t k = 0; k < 7; ++k) EXPECT_EQ(m(3, k), expected[k]);
}

TEST(TrackFeatures, PublishedDimensions) {
  Rng rng(7);
  const TrackFeatures f = track_features(fixture::noise(rng, 13.0));
  EXPECT_EQ(f.rp.size(), 1440u);
  EXPECT_EQ(f.rh.size(), 60u);
  EXPECT_EQ(f.ssd.size(), 168u);
  EXPECT_EQ(f.mvd.size(), 420u);
  EXPECT_EQ(f.tssd.size(), 1176u);
  EXPECT_EQ(f.trh.size(), 420u);
  EXPECT_EQ(f.segments_used, 2u);
  for (const auto* v : {&f.rp, &f.rh, &f.ssd, &f.mvd, &f.tssd, &f.trh}) {
    for (double x : *v) EXPECT_TRUE(std::isfinite(x));
  }
}

TEST(TrackFeatures, TooShortThrows) {
  EXPECT_THROW(track_features(fixture::sine(440.0, 5.0)), InputError);
}

TEST(TrackFeatures, SingleSegmentHasFlatTemporalStats) {
  Rng rng(8);
  Matrix sone(24, kSegFrames);
  for (double& v : sone.values()) v = rng.uniform(0.0, 4.0);
  const TrackFeatures f = track_features(sone_only(sone, kFrameRate));
  EXPECT_EQ(f.segments_used, 1u);
  for (std::size_t d = 0; d < 60; ++d) {
    for (std::size_t k = 4; k < 7; ++k) EXPECT_EQ(f.trh[d * 7 + k], 0.0);
  }
}

TEST(TrackFeatures, IdenticalSegmentsAggregateToSegment) {
  Rng rng(9);
  Matrix one(24, kSegFrames), two(24, 2 * kSegFrames);
  for (double& v : one.values()) v = rng.uniform(0.0, 4.0);
  for (std::size_t b = 0; b < 24; ++b) {
    for (std::size_t t = 0; t < 2 * kSegFrames; ++t) two(b, t) = one(b, t % kSegFrames);
  }
  const TrackFeatures a = track_features(sone_only(one, kFrameRate));
  const TrackFeatures b = track_features(sone_only(two, kFrameRate));
  for (std::size_t i = 0; i < a.rp.size(); ++i) EXPECT_NEAR(a.rp[i], b.rp[i], 1e-9);
  for (std::size_t i = 0; i < a.ssd.size(); ++i) EXPECT_NEAR(a.ssd[i], b.ssd[i], 1e-9);
}

TEST(TrackFeatures, SegmentPermutationLeavesMedianRp) {
  Rng rng(10);
  Matrix sone(24, 3 * kSegFrames), perm(24, 3 * kSegFrames);
  for (double& v : sone.values()) v = rng.uniform(0.0, 4.0);
  const std::size_t order[3] = {2, 0, 1};
  for (std::size_t b = 0; b < 24; ++b) {
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t t = 0; t < kSegFrames; ++t) perm(b, s * kSegFrames + t) = sone(b, order[s] * kSegFrames + t);
    }
  }
  const TrackFeatures a = track_features(sone_only(sone, kFrameRate));
  const TrackFeatures b = track_features(sone_only(perm, kFrameRate));
  for (std::size_t i = 0; i < a.rp.size(); ++i) EXPECT_NEAR(a.rp[i], b.rp[i], 1e-9);
}

TEST(Mfcc, SilenceGivesConstantFrames) {
  AudioClip c;
  c.sample_rate = 22050.0;
  c.samples.assign(512 * 8, 0.0);
  const Matrix m = mfcc(c);
  EXPECT_EQ(m.rows(), 8u);
  EXPECT_EQ(m.cols(), 13u);
  for (std::size_t k = 0; k < 13; ++k) EXPECT_EQ(stats::variance(m.column(k)), 0.0);
}

TEST(Mfcc, ToneAndNoiseDiffer) {
  Rng rng(11);
  const Matrix a = mfcc(fixture::sine(440.0, 1.0)), b = mfcc(fixture::noise(rng, 1.0));
  double d = 0.0;
  for (std::size_t k = 0; k < 13; ++k) {
    const auto ca = a.column(k), cb = b.column(k);
    const double scale = std::max(1e-9, std::sqrt(0.5 * (stats::variance(ca) + stats::variance(cb))) + 1.0);
    d += std::pow((stats::mean(ca) - stats::mean(cb)) / scale, 2);
  }
  EXPECT_GT(std::sqrt(d), 0.1);
}

TEST(Mfcc, GainOnlyMovesFirstCoefficient) {
  Rng rng(12);
  const AudioClip c = fixture::noise(rng, 0.5);
  AudioClip g = c;
  for (double& v : g.samples) v *= 0.37;
  const Matrix a = mfcc(c), b = mfcc(g);
  for (std::size_t t = 0; t < a.rows(); ++t) {
    for (std::size_t k = 1; k < 13; ++k) EXPECT_NEAR(a(t, k), b(t, k), 1e-6);
  }
}

TEST(Chroma, PitchClassOfA) {
  const ChromaResult a = chroma(fixture::sine(440.0, 1.0));
  const ChromaResult b = chroma(fixture::sine(880.0, 1.0));
  for (const ChromaResult* r : {&a, &b}) {
    for (std::size_t t = 0; t < r->values.rows(); ++t) {
      const auto row = r->values.row(t);
      EXPECT_EQ(std::max_element(row.begin(), row.end()) - row.begin(), 9);
      EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-9);
      EXPECT_TRUE(r->significant[t]);
    }
  }
  EXPECT_EQ(pitch_class(261.63), 0);
}

TEST(Chroma, SilenceIsUniformAndFlagged) {
  AudioClip c;
  c.sample_rate = 22050.0;
  c.samples.assign(8192, 0.0);
  const ChromaResult r = chroma(c);
  for (std::size_t t = 0; t < r.values.rows(); ++t) {
    EXPECT_FALSE(r.significant[t]);
    for (double v : r.values.row(t)) EXPECT_DOUBLE_EQ(v, 1.0 / 12.0);
  }
}

TEST(Resample, KeepsSupportedRatesAndConvertsOthers) {
  const AudioClip c = fixture::sine(440.0, 1.0, 16000.0);
  const AudioClip r = analysis_clip(c);
  EXPECT_EQ(r.sample_rate, 22050.0);
  EXPECT_NEAR(r.duration(), 1.0, 1e-3);
  EXPECT_EQ(analysis_clip(fixture::sine(440.0, 0.1, 44100.0)).sample_rate, 44100.0);
}
