#include <avmir/shotviz.hpp>

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace avmir;

namespace {

ActivityProfile profile_of(std::vector<double> d) {
  ActivityProfile p;
  p.distances = std::move(d);
  return p;
}

}  // namespace

TEST(MeanColorBar, ConstantFramesGiveConstantBar) {
  std::vector<Frame> frames(12, fixture::solid(8, 6, {10, 200, 30}));
  const Frame img = mean_color_bar(frames).image();
  EXPECT_EQ(img.width(), 12);
  EXPECT_EQ(img.height(), 6);
  for (const Rgb& p : img.pixels()) EXPECT_EQ(p, (Rgb{10, 200, 30}));
}

TEST(MeanColorBar, AlternatingFramesGiveAlternatingColumns) {
  std::vector<Frame> frames;
  for (int i = 0; i < 6; ++i) frames.push_back(fixture::solid(4, 3, i % 2 ? Rgb{255, 255, 255} : Rgb{0, 0, 0}));
  const Frame img = mean_color_bar(frames).image();
  for (int x = 0; x < 6; ++x) {
    for (int y = 0; y < 3; ++y) EXPECT_EQ(img.at(x, y).r, x % 2 ? 255 : 0);
  }
}

TEST(MeanColorBar, ColumnsMatchRowAveragesAndIgnoreMirroring) {
  Rng rng(1);
  std::vector<Frame> frames, mirrored;
  for (int i = 0; i < 5; ++i) {
    frames.push_back(fixture::random_frame(rng, 9, 7));
    Frame m(9, 7);
    for (int y = 0; y < 7; ++y) {
      for (int x = 0; x < 9; ++x) m.at(8 - x, y) = frames.back().at(x, y);
    }
    mirrored.push_back(m);
  }
  const MeanColorBar bar = mean_color_bar(frames), mbar = mean_color_bar(mirrored);
  EXPECT_EQ(bar.width(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    for (int y = 0; y < 7; ++y) {
      double s = 0.0;
      for (int x = 0; x < 9; ++x) s += frames[i].at(x, y).g;
      EXPECT_NEAR(bar.mean(i, static_cast<std::size_t>(y), 1), s / 9.0, 1e-12);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        EXPECT_NEAR(bar.mean(i, static_cast<std::size_t>(y), ch), mbar.mean(i, static_cast<std::size_t>(y), ch), 1e-12);
      }
    }
  }
  EXPECT_EQ(bar.image(20).height(), 20);
  EXPECT_EQ(bar.image(20).width(), 5);
}

TEST(MeanColorBar, Errors) {
  EXPECT_THROW(mean_color_bar(std::vector<Frame>{}), InputError);
  const std::vector<Frame> mixed{fixture::solid(2, 2, {}), fixture::solid(2, 3, {})};
  EXPECT_THROW(mean_color_bar(mixed), InputError);
}

TEST(Activity, BlackToWhiteIsMaximal) {
  const std::vector<Frame> f{fixture::solid(6, 4, {0, 0, 0}), fixture::solid(6, 4, {255, 255, 255})};
  for (ActivityMetric m : {ActivityMetric::MeanRgbL1, ActivityMetric::HistogramChi2}) {
    const ActivityProfile p = frame_activity(f, m);
    ASSERT_EQ(p.distances.size(), 1u);
    EXPECT_DOUBLE_EQ(p.distances[0], 1.0);
  }
}

TEST(Activity, IdenticalFramesAreZeroAndRangeHolds) {
  Rng rng(2);
  std::vector<Frame> f;
  const Frame a = fixture::random_frame(rng, 8, 8);
  f.push_back(a);
  f.push_back(a);
  for (int i = 0; i < 20; ++i) f.push_back(fixture::random_frame(rng, 8, 8));
  for (ActivityMetric m : {ActivityMetric::MeanRgbL1, ActivityMetric::HistogramChi2}) {
    const ActivityProfile p = frame_activity(f, m);
    ASSERT_EQ(p.distances.size(), f.size() - 1);
    EXPECT_EQ(p.distances[0], 0.0);
    for (double d : p.distances) {
      EXPECT_GE(d, 0.0);
      EXPECT_LE(d, 1.0);
    }
  }
  EXPECT_THROW(frame_activity(std::vector<Frame>{a}, ActivityMetric::MeanRgbL1), InputError);
  EXPECT_THROW(parse_activity_metric("sad"), InputError);
}

TEST(Activity, MeanRgbMatchesDirectFormula) {
  Rng rng(3);
  const std::vector<Frame> f{fixture::random_frame(rng, 5, 5), fixture::random_frame(rng, 5, 5)};
  double m[2][3] = {};
  for (int i = 0; i < 2; ++i) {
    for (const Rgb& p : f[static_cast<std::size_t>(i)].pixels()) {
      m[i][0] += p.r / 25.0;
      m[i][1] += p.g / 25.0;
      m[i][2] += p.b / 25.0;
    }
  }
  const double expected = (std::abs(m[0][0] - m[1][0]) + std::abs(m[0][1] - m[1][1]) + std::abs(m[0][2] - m[1][2])) / 765.0;
  EXPECT_NEAR(frame_activity(f, ActivityMetric::MeanRgbL1).distances[0], expected, 1e-12);
}

TEST(Cuts, SingleSpikeIsReportedAtNextFrame) {
  for (std::size_t pos : {0u, 7u, 20u, 29u}) {
    std::vector<double> d(30, 0.01);
    d[pos] = 0.5;
    EXPECT_EQ(naive_cut_detect(profile_of(d)), std::vector<std::size_t>{pos + 1});
  }
}

TEST(Cuts, HardCutInFrameSequence) {
  std::vector<Frame> f(10, fixture::solid(4, 4, {20, 20, 20}));
  for (int i = 0; i < 10; ++i) f.push_back(fixture::solid(4, 4, {static_cast<std::uint8_t>(200 + i), 60, 60}));
  Rng rng(4);
  for (Frame& x : f) {
    for (Rgb& p : x.pixels()) p.g = static_cast<std::uint8_t>(p.g + rng.below(3));
  }
  EXPECT_EQ(naive_cut_detect(frame_activity(f, ActivityMetric::MeanRgbL1)), std::vector<std::size_t>{10});
}

TEST(Cuts, StrobeOverFires) {
  std::vector<Frame> f;
  for (int i = 0; i < 40; ++i) f.push_back(fixture::solid(4, 4, {100, 100, 100}));
  for (int i : {12, 14, 16, 30}) f[static_cast<std::size_t>(i)] = fixture::solid(4, 4, {255, 255, 255});
  const auto cuts = naive_cut_detect(frame_activity(f, ActivityMetric::MeanRgbL1), {5, 3.0});
  EXPECT_GT(cuts.size(), 0u);
}

TEST(Cuts, PlateauReportsFirstOccurrence) {
  std::vector<double> d(20, 0.01);
  d[8] = d[9] = 0.4;
  EXPECT_EQ(naive_cut_detect(profile_of(d), {7, 3.0}), std::vector<std::size_t>{9});
}

TEST(Cuts, FlatProfileHasNoCuts) {
  EXPECT_TRUE(naive_cut_detect(profile_of(std::vector<double>(25, 0.2))).empty());
  EXPECT_TRUE(naive_cut_detect(profile_of({})).empty());
}

TEST(Cuts, WindowValidation) {
  const ActivityProfile p = profile_of({0.1, 0.2});
  EXPECT_THROW(naive_cut_detect(p, {4, 3.0}), InputError);
  EXPECT_THROW(naive_cut_detect(p, {1, 3.0}), InputError);
  EXPECT_THROW(naive_cut_detect(p, {5, -1.0}), InputError);
}

TEST(Cuts, DetectionsAreLocalMaximaAboveThreshold) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> d(60);
    for (double& v : d) v = rng.uniform() < 0.1 ? rng.uniform(0.3, 1.0) : rng.uniform(0.0, 0.05);
    const CutOptions opt{static_cast<int>(3 + 2 * rng.below(6)), rng.uniform(1.0, 5.0)};
    const std::size_t half = static_cast<std::size_t>(opt.window / 2);
    for (std::size_t cut : naive_cut_detect(profile_of(d), opt)) {
      const std::size_t i = cut - 1, lo = i >= half ? i - half : 0, hi = std::min(d.size() - 1, i + half);
      std::vector<double> win(d.begin() + static_cast<std::ptrdiff_t>(lo), d.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
      EXPECT_EQ(*std::max_element(win.begin(), win.end()), d[i]);
      EXPECT_GT(d[i], opt.kappa * stats::median(win));
    }
  }
}
