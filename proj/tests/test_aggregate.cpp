#include <avmir/aggregate.hpp>

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace avmir;

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -3.0, double hi = 5.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

SegmentBundle random_bundle(Rng& rng, std::size_t n) {
  SegmentBundle b;
  b.timbre = random_matrix(rng, n, 12);
  b.pitches = random_matrix(rng, n, 12, 0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    b.loudness_max.push_back(rng.uniform(-60.0, 0.0));
    b.loudness_max_time.push_back(rng.uniform(0.0, 1.0));
    b.segment_length.push_back(rng.uniform(0.5, 1.5));
  }
  return b;
}

// Independent two-pass oracle for one moment of a column.
double oracle_moment(std::vector<double> x, Moment m) {
  const double n = static_cast<double>(x.size());
  double mu = 0.0;
  for (double v : x) mu += v / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    m2 += std::pow(v - mu, 2) / n;
    m3 += std::pow(v - mu, 3) / n;
    m4 += std::pow(v - mu, 4) / n;
  }
  std::sort(x.begin(), x.end());
  const std::size_t h = x.size() / 2;
  switch (m) {
    case Moment::Mean: return mu;
    case Moment::Median: return x.size() % 2 ? x[h] : 0.5 * (x[h - 1] + x[h]);
    case Moment::Variance: return m2;
    case Moment::StdDev: return std::sqrt(m2);
    case Moment::Min: return x.front();
    case Moment::Max: return x.back();
    case Moment::Range: return x.back() - x.front();
    case Moment::Skewness: return m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0;
    case Moment::Kurtosis: return m2 > 0 ? m4 / (m2 * m2) : 0.0;
  }
  return 0.0;
}

}  // namespace

TEST(Moments, IdenticalVectors) {
  Matrix seq(5, 3);
  for (std::size_t r = 0; r < 5; ++r) {
    seq(r, 0) = 1.5;
    seq(r, 1) = -2.0;
    seq(r, 2) = 7.0;
  }
  const auto m = moments(seq, MomentSpec::eight());
  const double v[3] = {1.5, -2.0, 7.0};
  for (std::size_t d = 0; d < 3; ++d) {
    const std::vector<double> expected{v[d], v[d], 0, v[d], v[d], 0, 0, 0};
    for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(m[d * 8 + k], expected[k]);
  }
}

TEST(Moments, MeanAndRange) {
  const std::vector<double> x{1, 2, 3, 4};
  const auto m = scalar_moments(x, MomentSpec{Moment::Mean, Moment::Range});
  EXPECT_DOUBLE_EQ(m[0], 2.5);
  EXPECT_DOUBLE_EQ(m[1], 3.0);
}

TEST(Moments, MatchBruteForceOracle) {
  Rng rng(1);
  const Matrix seq = random_matrix(rng, 100, 12);
  const MomentSpec spec{Moment::Mean,  Moment::Median, Moment::Variance, Moment::StdDev, Moment::Min,
                        Moment::Max,   Moment::Range,  Moment::Skewness, Moment::Kurtosis};
  const auto m = moments(seq, spec);
  ASSERT_EQ(m.size(), 12u * spec.size());
  for (std::size_t d = 0; d < 12; ++d) {
    std::size_t k = 0;
    for (Moment mo : spec) EXPECT_NEAR(m[d * spec.size() + k++], oracle_moment(seq.column(d), mo), 1e-9);
  }
}

TEST(Moments, PermutationInvariant) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.below(30);
    const Matrix seq = random_matrix(rng, n, 4);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    Matrix perm(n, 4);
    for (std::size_t r = 0; r < n; ++r) std::copy(seq.row(order[r]).begin(), seq.row(order[r]).end(), perm.row(r).begin());
    const auto a = moments(seq, MomentSpec::eight()), b = moments(perm, MomentSpec::eight());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
  }
}

TEST(Moments, AffineTransform) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto x = fixture::random_vector(rng, 3 + rng.below(40), -2.0, 2.0);
    const double a = rng.uniform(0.1, 4.0), b = rng.uniform(-5.0, 5.0);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = a * x[i] + b;
    const auto mx = scalar_moments(x, MomentSpec::eight()), my = scalar_moments(y, MomentSpec::eight());
    // mean, median, variance, min, max, range, skewness, kurtosis
    EXPECT_NEAR(my[0], a * mx[0] + b, 1e-9);
    EXPECT_NEAR(my[1], a * mx[1] + b, 1e-9);
    EXPECT_NEAR(my[2], a * a * mx[2], 1e-9);
    EXPECT_NEAR(my[3], a * mx[3] + b, 1e-9);
    EXPECT_NEAR(my[4], a * mx[4] + b, 1e-9);
    EXPECT_NEAR(my[5], a * mx[5], 1e-9);
    EXPECT_NEAR(my[6], mx[6], 1e-9);
    EXPECT_NEAR(my[7], mx[7], 1e-9);
  }
}

TEST(Moments, RejectsEmptyAndDuplicates) {
  EXPECT_THROW(moments(Matrix(0, 3), MomentSpec::eight()), InputError);
  EXPECT_THROW((MomentSpec{Moment::Mean, Moment::Mean}), InputError);
  EXPECT_THROW(MomentSpec(std::vector<Moment>{}), InputError);
  EXPECT_THROW(parse_moment("average"), InputError);
  EXPECT_EQ(parse_moment("kurtosis"), Moment::Kurtosis);
}

TEST(Presets, PublishedDimensions) {
  Rng rng(4);
  const SegmentBundle b = random_bundle(rng, 20);
  const std::pair<Preset, std::size_t> expected[] = {{Preset::EN0, 12}, {Preset::EN1, 24}, {Preset::EN2, 24}, {Preset::EN3, 90},
                                                     {Preset::EN4, 96}, {Preset::EN5, 192}, {Preset::TEN, 216}};
  for (auto [p, d] : expected) {
    EXPECT_EQ(preset(b, p).values.size(), d);
    EXPECT_EQ(preset_dimension(p), d);
  }
  EXPECT_EQ(parse_preset("TEN"), Preset::TEN);
  EXPECT_THROW(parse_preset("EN9"), InputError);
}

TEST(Presets, IdenticalSegmentsHaveZeroCovariance) {
  Rng rng(5);
  SegmentBundle b = random_bundle(rng, 6);
  for (std::size_t r = 1; r < 6; ++r) std::copy(b.timbre.row(0).begin(), b.timbre.row(0).end(), b.timbre.row(r).begin());
  const auto v = preset(b, Preset::EN3).values;
  for (std::size_t i = 12; i < 90; ++i) EXPECT_NEAR(v[i], 0.0, 1e-12);
}

TEST(Presets, SingleSegmentEn3IsFlagged) {
  Rng rng(6);
  const PresetResult r = preset(random_bundle(rng, 1), Preset::EN3);
  EXPECT_TRUE(r.degenerate);
  for (std::size_t i = 12; i < 90; ++i) EXPECT_EQ(r.values[i], 0.0);
}

TEST(Presets, En3MatchesCovarianceOracle) {
  Rng rng(7);
  const SegmentBundle b = random_bundle(rng, 15);
  const auto v = preset(b, Preset::EN3).values;
  std::size_t k = 12;
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = i; j < 12; ++j) {
      const auto ci = b.timbre.column(i), cj = b.timbre.column(j);
      const double mi = stats::mean(ci), mj = stats::mean(cj);
      double s = 0.0;
      for (std::size_t r = 0; r < 15; ++r) s += (ci[r] - mi) * (cj[r] - mj);
      EXPECT_NEAR(v[k++], s / 15.0, 1e-9);
    }
  }
}

TEST(Presets, En5ConcatenatesTimbreAndPitches) {
  Rng rng(8);
  const SegmentBundle b = random_bundle(rng, 9);
  const auto en5 = preset(b, Preset::EN5).values;
  auto expected = moments(b.timbre, MomentSpec::eight());
  const auto p = moments(b.pitches, MomentSpec::eight());
  expected.insert(expected.end(), p.begin(), p.end());
  EXPECT_EQ(en5, expected);
  const auto ten = preset(b, Preset::TEN).values;
  EXPECT_TRUE(std::equal(en5.begin(), en5.end(), ten.begin()));
}

TEST(Bundle, TenSecondClipGivesTenSegments) {
  Rng rng(9);
  const SegmentBundle b = segment_bundle_from_audio(fixture::noise(rng, 10.0));
  EXPECT_EQ(b.segments(), 10u);
  EXPECT_EQ(b.timbre.cols(), 12u);
  EXPECT_EQ(b.pitches.cols(), 12u);
  EXPECT_EQ(preset(b, Preset::TEN).values.size(), 216u);
}

TEST(Bundle, SilenceSitsAtLoudnessFloor) {
  AudioClip c;
  c.sample_rate = 22050.0;
  c.samples.assign(3 * 22050, 0.0);
  const SegmentBundle b = segment_bundle_from_audio(c);
  for (double v : b.loudness_max) EXPECT_EQ(v, -72.0);
}

TEST(Bundle, ClickTimeIsRecovered) {
  AudioClip c;
  c.sample_rate = 22050.0;
  c.samples.assign(3 * 22050, 0.0);
  c.samples[static_cast<std::size_t>(0.25 * 22050)] = 0.9;
  const SegmentBundle b = segment_bundle_from_audio(c);
  EXPECT_NEAR(b.loudness_max_time[0], 0.25, 1e-3);
  EXPECT_NEAR(b.loudness_max[0], 20.0 * std::log10(0.9), 1e-9);
}

TEST(Bundle, ShortClipThrows) {
  EXPECT_THROW(segment_bundle_from_audio(fixture::sine(440.0, 1.5)), InputError);
}

TEST(VisualAggregation, ReferenceDimensionsAfterSevenMoments) {
  const std::pair<VisualFeature, std::size_t> expected[] = {{VisualFeature::Gcs, 42}, {VisualFeature::Gev, 21},
                                                            {VisualFeature::Cf, 7},   {VisualFeature::Cn, 56},
                                                            {VisualFeature::Ic, 28},  {VisualFeature::Waf, 126}};
  for (auto [f, d] : expected) {
    const std::vector<VisualFeature> one{f};
    EXPECT_EQ(video_feature_dimension(one, LfpPreset::Bands80, 25.0), d);
  }
  const auto all = parse_visual_features("gcs,gev,cf,cn,ic,waf,lfp");
  EXPECT_EQ(video_feature_dimension(all, LfpPreset::Bands80, 25.0), 360u);
}

TEST(VisualAggregation, FinishMatchesSchemaAndMoments) {
  Rng rng(10);
  const auto feats = parse_visual_features("gcs,gev,lfp");
  VideoAggregator agg(feats);
  std::vector<Frame> frames;
  for (int i = 0; i < 30; ++i) {
    frames.push_back(fixture::random_frame(rng, 16, 12));
    agg.add(frames.back());
  }
  const auto v = agg.finish(25.0);
  const auto names = agg.schema(25.0);
  ASSERT_EQ(v.size(), names.size());
  EXPECT_EQ(v.size(), 42u + 21u + 80u);
  EXPECT_EQ(names[0], "gcs_0_min");
  EXPECT_EQ(names[6], "gcs_0_kurtosis");
  EXPECT_EQ(names.back(), "lfp_79");
  // gev_1 mean over frames equals the mean of the per-frame arousal values.
  double mean_arousal = 0.0;
  for (const Frame& f : frames) mean_arousal += gev(rgb_to_ihls(f))[1] / 30.0;
  const auto it = std::find(names.begin(), names.end(), "gev_1_mean");
  ASSERT_NE(it, names.end());
  EXPECT_NEAR(v[static_cast<std::size_t>(it - names.begin())], mean_arousal, 1e-9);
}

TEST(VisualAggregation, ParseRejectsUnknownAndDuplicates) {
  EXPECT_THROW(parse_visual_features("gcs,foo"), InputError);
  EXPECT_THROW(parse_visual_features("gcs,gcs"), InputError);
  VideoAggregator empty(parse_visual_features("gcs"));
  EXPECT_THROW(empty.finish(25.0), InputError);
}
