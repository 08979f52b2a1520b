// Acceptance suite: one PASS/FAIL line per criterion AC1..AC7.

#include <avmir/concepts.hpp>
#include <avmir/io.hpp>
#include <avmir/shotviz.hpp>

#include <sys/wait.h>

#include <chrono>
#include <functional>
#include <iostream>

#include "test_support.hpp"

using namespace avmir;

namespace {

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    if (!(std::abs(got - want) <= tol * std::max(1.0, std::abs(want)))) {
      failures_.push_back(what + ": got " + std::to_string(got) + ", want " + std::to_string(want));
    }
  }
  void note(const std::string& s) { notes_.push_back(s); }
  const std::vector<std::string>& failures() const { return failures_; }
  const std::vector<std::string>& notes() const { return notes_; }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

bool criterion(const std::string& id, const std::string& title, double budget_seconds, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.expect(secs <= budget_seconds, "runtime " + std::to_string(secs) + " s exceeds " + std::to_string(budget_seconds) + " s");
  const bool ok = c.failures().empty();
  std::printf("%s %s %s (%.2f s)\n", id.c_str(), ok ? "PASS" : "FAIL", title.c_str(), secs);
  for (const auto& n : c.notes()) std::printf("    %s\n", n.c_str());
  for (const auto& f : c.failures()) std::printf("    - %s\n", f.c_str());
  std::fflush(stdout);
  return ok;
}

// ------------------------------------------------------------------ oracles

std::vector<double> moment_oracle(std::vector<double> x) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  std::sort(x.begin(), x.end());
  const double median = x.size() % 2 ? x[x.size() / 2] : 0.5 * (x[x.size() / 2 - 1] + x[x.size() / 2]);
  const double skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0, kurt = m2 > 0.0 ? m4 / (m2 * m2) : 0.0;
  // Mean, Median, Variance, StdDev, Min, Max, Range, Skewness, Kurtosis
  return {mean, median, m2, std::sqrt(m2), x.front(), x.back(), x.back() - x.front(), skew, kurt};
}

// Seven statistics (min, max, mean, median, variance, skewness, kurtosis).
std::vector<double> seven_oracle(const std::vector<double>& x) {
  const auto m = moment_oracle(x);
  return {m[4], m[5], m[0], m[1], m[2], m[7], m[8]};
}

int knn_oracle(const Matrix& x, const std::vector<int>& y, std::span<const double> q, int k, int classes) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) s += (q[j] - x(i, j)) * (q[j] - x(i, j));
    all.push_back({std::sqrt(s), i});
  }
  std::sort(all.begin(), all.end());
  std::vector<int> votes(static_cast<std::size_t>(classes), 0);
  std::vector<double> dist(static_cast<std::size_t>(classes), 0.0);
  for (int i = 0; i < k; ++i) {
    const auto c = static_cast<std::size_t>(y[all[static_cast<std::size_t>(i)].second]);
    ++votes[c];
    dist[c] += all[static_cast<std::size_t>(i)].first;
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < votes.size(); ++c) {
    if (votes[c] > votes[best] || (votes[c] == votes[best] && votes[c] > 0 && dist[c] < dist[best])) best = c;
  }
  return static_cast<int>(best);
}

// ---------------------------------------------------------- synthetic data

// Noise bursts at `tempo` Hz, 20% duty cycle.
AudioClip pulse_train(Rng& rng, double tempo, double seconds) {
  AudioClip c = fixture::noise(rng, seconds, 22050.0, rng.uniform(0.1, 0.4));
  const double phase = rng.uniform();
  for (std::size_t i = 0; i < c.samples.size(); ++i) {
    const double t = static_cast<double>(i) / c.sample_rate;
    const double p = t * tempo + phase;
    if (p - std::floor(p) > 0.2) c.samples[i] *= 0.05;
  }
  return c;
}

// Noisy frames around a warm or cold base colour.
std::vector<Frame> tinted_video(Rng& rng, bool warm, int frames) {
  const double gain = rng.uniform(0.6, 1.0);
  const Rgb base = warm ? Rgb{200, 90, 40} : Rgb{40, 90, 200};
  std::vector<Frame> out;
  for (int f = 0; f < frames; ++f) {
    Frame fr(24, 16);
    for (Rgb& p : fr.pixels()) {
      const auto ch = [&](std::uint8_t v) {
        return static_cast<std::uint8_t>(std::clamp(v * gain + rng.uniform(-40.0, 40.0), 0.0, 255.0));
      };
      p = {ch(base.r), ch(base.g), ch(base.b)};
    }
    out.push_back(std::move(fr));
  }
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(AVMIR_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ------------------------------------------------------------------ criteria

void ac1(Check& c) {
  Rng rng(1);
  const TrackFeatures tf = track_features(fixture::noise(rng, 13.0));
  const std::pair<const char*, std::pair<std::size_t, std::size_t>> audio[] = {
      {"RP", {tf.rp.size(), 1440}}, {"SSD", {tf.ssd.size(), 168}},  {"RH", {tf.rh.size(), 60}},
      {"MVD", {tf.mvd.size(), 420}}, {"TSSD", {tf.tssd.size(), 1176}}, {"TRH", {tf.trh.size(), 420}}};
  for (const auto& [name, d] : audio) c.expect(d.first == d.second, std::string(name) + " dimension " + std::to_string(d.first));

  std::vector<Frame> video;
  for (int i = 0; i < 30; ++i) video.push_back(fixture::random_frame(rng, 40, 30));
  const std::pair<const char*, std::size_t> visual[] = {{"gcs", 42}, {"gev", 21}, {"cf", 7},  {"cn", 56},
                                                        {"ic", 28},  {"waf", 126}, {"gcs,gev,cf,cn,ic,waf,lfp", 360}};
  for (const auto& [list, want] : visual) {
    VideoAggregator agg(parse_visual_features(list));
    for (const Frame& f : video) agg.add(f);
    const auto v = agg.finish(25.0);
    c.expect(v.size() == want && agg.schema(25.0).size() == want, std::string(list) + " dimension " + std::to_string(v.size()));
  }

  const SegmentBundle b = segment_bundle_from_audio(fixture::noise(rng, 10.0));
  c.expect(preset(b, Preset::TEN).values.size() == 216, "TEN dimension");
  c.expect(preset(b, Preset::EN3).values.size() == 90, "EN3 dimension");
  c.note("RP 1440, SSD 168, RH 60, MVD 420, TSSD 1176, TRH 420; visual 42/21/7/56/28/126, combined 360; TEN 216, EN3 90");
}

void ac2(Check& c) {
  Rng rng(2);
  const MomentSpec all{Moment::Mean, Moment::Median,   Moment::Variance, Moment::StdDev, Moment::Min,
                       Moment::Max,  Moment::Range,    Moment::Skewness, Moment::Kurtosis};
  for (int inst = 0; inst < 100; ++inst) {
    const auto x = fixture::random_vector(rng, 1 + rng.below(50), -100.0, 100.0);
    const auto got = scalar_moments(x, all), want = moment_oracle(x);
    for (std::size_t i = 0; i < want.size(); ++i) c.near(got[i], want[i], 1e-9, "moment " + std::to_string(i));

    Matrix seg(24, 2 + rng.below(40));
    for (double& v : seg.values()) v = rng.uniform(0.0, 30.0);
    const Matrix s = ssd(seg);
    for (std::size_t b = 0; b < 24; ++b) {
      const auto row = seg.row(b);
      const auto o = seven_oracle({row.begin(), row.end()});
      for (std::size_t k = 0; k < 7; ++k) c.near(s(b, k), o[k], 1e-9, "ssd");
    }
    Matrix rp(24, 60);
    for (double& v : rp.values()) v = rng.uniform(0.0, 5.0);
    const Matrix mv = modvar(rp);
    for (std::size_t j = 0; j < 60; ++j) {
      const auto o = seven_oracle(rp.column(j));
      for (std::size_t k = 0; k < 7; ++k) c.near(mv(j, k), o[k], 1e-9, "modvar");
    }
  }

  Matrix x(200, 4);
  std::vector<int> y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    y[i] = static_cast<int>(i % 5);
    for (std::size_t j = 0; j < 4; ++j) x(i, j) = rng.normal() + 0.8 * y[i] * (j == 0);
  }
  std::size_t agree = 0;
  for (int k : {1, 3, 7}) {
    KnnClassifier knn(k, Metric::L2);
    knn.fit(x, y, 5);
    for (int q = 0; q < 200; ++q) {
      std::vector<double> probe(4);
      for (double& v : probe) v = rng.uniform(-3.0, 6.0);
      agree += knn.predict(probe).label == knn_oracle(x, y, probe, k, 5) ? 1 : 0;
    }
  }
  c.expect(agree == 600, "kNN agreed with exhaustive scan on " + std::to_string(agree) + " of 600 probes");

  const std::vector<double> weights{0.9, 0.4, 0.4, 0.25, 0.6, 0.1};
  std::size_t configs = 0, matched = 0;
  for (std::size_t members = 1; members <= 3; ++members) {
    for (std::size_t w0 = 0; w0 + members <= weights.size(); ++w0) {
      std::size_t combos = 1;
      for (std::size_t i = 0; i < members; ++i) combos *= 3;
      for (std::size_t code = 0; code < combos; ++code) {
        // One single-member modality per vote; each member predicts a fixed class.
        std::vector<std::vector<EnsembleMember>> mods;
        std::vector<std::vector<double>> rows;
        double sums[3] = {0, 0, 0};
        std::size_t z = code;
        for (std::size_t i = 0; i < members; ++i) {
          const int label = static_cast<int>(z % 3);
          z /= 3;
          LabeledDataset d;
          d.features = Matrix(1, 1, 0.0);
          d.labels = {label};
          d.class_names = {"a", "b", "c"};
          d.schema = {"x"};
          ClassifierSpec spec;
          spec.kind = ClassifierKind::Majority;
          mods.push_back({EnsembleMember{"m" + std::to_string(i), std::make_shared<Model>(d, spec), weights[w0 + i]}});
          rows.push_back({0.0});
          sums[label] += weights[w0 + i];
        }
        int best = 0;
        for (int k = 1; k < 3; ++k) {
          if (sums[k] > sums[best]) best = k;
        }
        ++configs;
        const VoteResult r = ensemble_predict(mods, rows, 3);
        matched += r.label == best && std::abs(r.sums[0] - sums[0]) + std::abs(r.sums[1] - sums[1]) + std::abs(r.sums[2] - sums[2]) < 1e-12;
      }
    }
  }
  c.expect(matched == configs, "ensemble matched enumeration on " + std::to_string(matched) + " of " + std::to_string(configs));
  c.note("100 moment/SSD/ModVar instances, 600 kNN probes over 200 points, " + std::to_string(configs) + " ensemble configurations");
}

void ac3(Check& c) {
  // LFP blink: lightness square wave at 2 Hz, 25 fps.
  const double fps = 25.0;
  std::vector<std::vector<double>> hist;
  for (int t = 0; t < 512; ++t) {
    const bool on = std::fmod(t * 2.0 / fps, 1.0) < 0.5;
    hist.push_back(lightness_histogram(rgb_to_lch(fixture::solid(8, 8, on ? Rgb{230, 230, 230} : Rgb{30, 30, 30})), 24));
  }
  const LfpPattern p = lfp(stack_rows(hist), fps);
  const auto peak = static_cast<std::size_t>(std::max_element(p.histogram.begin(), p.histogram.end()) - p.histogram.begin());
  const double bin = fps / 512.0;
  c.expect(std::abs(p.modulation_hz[peak] - 2.0) <= bin + 1e-9, "LFP peak at " + std::to_string(p.modulation_hz[peak]) + " Hz");

  // Rhythm pattern: noise amplitude-modulated at 4 Hz.
  Rng rng(3);
  AudioClip clip = fixture::noise(rng, 6.5);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    clip.samples[i] *= 0.5 * (1.0 + std::sin(2.0 * std::numbers::pi * 4.0 * static_cast<double>(i) / clip.sample_rate));
  }
  const Sonogram s = sonogram(clip);
  const std::size_t n = frames_for_seconds(s, 6.0);
  const Matrix rp = rhythm_pattern(slice_frames(s.sone, 0, n), s.frame_rate);
  const auto rh = rhythm_histogram(rp);
  const auto col = static_cast<std::size_t>(std::max_element(rh.begin(), rh.end()) - rh.begin());
  const double expected = 4.0 * static_cast<double>(n) / s.frame_rate - 1.0;
  c.expect(std::abs(static_cast<double>(col) - expected) <= 1.0,
           "rhythm pattern peak column " + std::to_string(col) + " (" + std::to_string(modulation_frequency(col, n, s.frame_rate)) + " Hz)");

  // Chroma of a 440 Hz sine.
  const ChromaResult ch = chroma(fixture::sine(440.0, 2.0));
  const auto mean = moments(ch.values, MomentSpec{Moment::Mean});
  const auto pc = std::max_element(mean.begin(), mean.end()) - mean.begin();
  c.expect(pc == 9, "chroma argmax " + std::to_string(pc));
  c.note("LFP peak " + std::to_string(p.modulation_hz[peak]) + " Hz; RP peak " +
         std::to_string(modulation_frequency(col, n, s.frame_rate)) + " Hz; chroma class " + std::to_string(pc));
}

void ac4(Check& c) {
  Rng rng(4);
  const int per_class = 50;
  std::vector<std::vector<double>> audio_rows, visual_rows;
  std::vector<int> labels;
  const std::vector<VisualFeature> vis = parse_visual_features("gcs,cn");
  for (int cls = 0; cls < 4; ++cls) {
    const bool fast = cls >= 2, warm = cls % 2 == 0;  // A slow warm, B slow cold, C fast warm, D fast cold
    for (int i = 0; i < per_class; ++i) {
      const double tempo = (fast ? 5.0 : 2.0) + rng.uniform(-0.2, 0.2);
      audio_rows.push_back(track_features(pulse_train(rng, tempo, 6.5)).rh);
      VideoAggregator agg(vis);
      for (const Frame& f : tinted_video(rng, warm, 20)) agg.add(f);
      visual_rows.push_back(agg.finish(25.0));
      labels.push_back(cls);
    }
  }
  const auto dataset = [&](const std::vector<std::vector<double>>& rows) {
    LabeledDataset d;
    d.features = stack_rows(rows);
    d.labels = labels;
    d.class_names = {"A", "B", "C", "D"};
    for (std::size_t j = 0; j < d.features.cols(); ++j) d.schema.push_back("f" + std::to_string(j));
    return d;
  };
  const LabeledDataset audio = dataset(audio_rows), visual = dataset(visual_rows);
  const std::vector<FusionPart> parts{{"audio", audio}, {"visual", visual}};
  const LabeledDataset fused = early_fuse(parts);
  const FoldAssignment folds = stratified_kfold(labels, 10, 1, 11);
  ClassifierSpec spec;
  spec.seed = 5;
  const double a = cross_validate(audio, spec, folds).mean_accuracy;
  const double v = cross_validate(visual, spec, folds).mean_accuracy;
  const double f = cross_validate(fused, spec, folds).mean_accuracy;
  c.expect(a <= 0.60, "audio-only accuracy " + std::to_string(a));
  c.expect(v <= 0.60, "visual-only accuracy " + std::to_string(v));
  c.expect(f >= 0.95, "fused accuracy " + std::to_string(f));
  char buf[128];
  std::snprintf(buf, sizeof buf, "SVM 10-fold: audio %.3f, visual %.3f, fused %.3f (%zu + %zu dims)", a, v, f, audio.dims(), visual.dims());
  c.note(buf);
}

void ac5(Check& c) {
  const std::vector<Vote> votes{{0, 0.9}, {1, 0.4}, {1, 0.4}};
  const VoteResult r = weighted_vote(votes, 2);
  c.expect(r.label == 0, "worked vote example resolved to class " + std::to_string(r.label));
  c.near(r.sums[1], 0.8, 1e-12, "summed weight of B");

  std::vector<std::pair<std::string, double>> preds(10, {"A", 0.5});
  preds.push_back({"B", 0.9});
  const ArtistScoreBoard board = artist_score(preds);
  const double sa = 0.5 / std::log(10.0), sb = 0.9 / std::log(2.0);
  c.near(board.labels.at("A").score, sa, 1e-12, "score of A");
  c.near(board.labels.at("B").score, sb, 1e-12, "score of B");
  c.expect(board.winner == (sa > sb ? "A" : "B"), "ln-penalty winner " + board.winner);
  char buf[96];
  std::snprintf(buf, sizeof buf, "vote sums A %.1f B %.1f; ln scores A %.4f B %.4f -> %s", r.sums[0], r.sums[1], sa, sb, board.winner.c_str());
  c.note(buf);
}

void ac6(Check& c) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    LabeledDataset d;
    d.features = Matrix(1 + rng.below(20), 1 + rng.below(30));
    for (double& v : d.features.values()) v = rng.normal() * std::pow(10.0, rng.uniform(-12.0, 12.0));
    d.class_names = {"x", "y z"};
    for (std::size_t r = 0; r < d.features.rows(); ++r) d.labels.push_back(static_cast<int>(rng.below(2)));
    for (std::size_t j = 0; j < d.features.cols(); ++j) d.schema.push_back("f" + std::to_string(j));
    const LabeledDataset back = parse_arff(encode_arff(d, "rt"));
    for (std::size_t i = 0; i < d.features.size(); ++i) {
      c.near(back.features.values()[i], d.features.values()[i], 1e-9, "ARFF value");
    }
    c.expect(back.labels == d.labels, "ARFF labels");

    std::vector<int> labels;
    const int classes = 2 + static_cast<int>(rng.below(4)), k = 2 + static_cast<int>(rng.below(9));
    for (int cl = 0; cl < classes; ++cl) labels.insert(labels.end(), k + rng.below(40), cl);
    rng.shuffle(labels);
    const FoldAssignment fa = stratified_kfold(labels, k, 2, rng.next());
    for (const auto& rep : fa.fold_of) {
      for (int cl = 0; cl < classes; ++cl) {
        const double nc = static_cast<double>(std::count(labels.begin(), labels.end(), cl));
        for (int fold = 0; fold < k; ++fold) {
          double in = 0.0;
          for (std::size_t i = 0; i < labels.size(); ++i) in += labels[i] == cl && rep[i] == fold;
          c.expect(std::abs(in - nc / k) <= 1.0, "fold deviation above 1");
        }
      }
    }

    nlohmann::json tracks = nlohmann::json::array();
    for (int t = 0; t < 60; ++t) {
      tracks.push_back({{"id", "t" + std::to_string(t)}, {"label", "g" + std::to_string(t % 3)}, {"artist", "a" + std::to_string(rng.below(15))}});
    }
    const Manifest m = parse_manifest(nlohmann::json{{"tracks", tracks}}.dump(), ".", false);
    SplitSpec spec;
    spec.filter = SplitFilter::Artist;
    spec.seed = rng.next();
    const Split s = make_splits(m, spec);
    std::set<std::string> train_artists;
    for (const auto& id : s.train) train_artists.insert(m.find(id)->artist);
    for (const auto& id : s.test) c.expect(!train_artists.contains(m.find(id)->artist), "artist on both sides");
  }

  fixture::TempDir dir;
  LabeledDataset d;
  d.features = Matrix(30, 4);
  for (double& v : d.features.values()) v = rng.normal();
  for (int i = 0; i < 30; ++i) d.labels.push_back(i % 3);
  d.class_names = {"a", "b", "c"};
  d.schema = {"w", "x", "y", "z"};
  write_arff(dir / "d.arff", d, "seeded");
  const std::vector<std::string> files{"metrics.json", "confusion.csv", "per_class.csv", "run.json"};
  std::vector<std::vector<std::string>> snapshots;
  for (int run = 0; run < 2; ++run) {
    c.expect(run_cli("crossval --arff " + (dir / "d.arff").string() + " --clf svm --folds 5 --repeats 3 --seed 9 --out " + (dir / "cv").string()) == 0,
             "crossval run failed");
    snapshots.emplace_back();
    for (const auto& f : files) snapshots.back().push_back(read_file_bytes(dir / "cv" / f));
    fs::remove_all(dir / "cv");
  }
  for (std::size_t i = 0; i < files.size(); ++i) c.expect(snapshots[0][i] == snapshots[1][i], files[i] + " differs between seeded runs");
  c.note("20 ARFF round trips, 20 fold assignments, 20 artist-filtered splits, byte-identical seeded CLI reruns");
}

void ac7(Check& c) {
  // Two scenes (one true cut at frame 60) with strobe flashes inside the first scene.
  std::vector<Frame> video;
  Rng rng(7);
  for (int i = 0; i < 120; ++i) {
    Frame f = fixture::solid(16, 12, i < 60 ? Rgb{60, 40, 90} : Rgb{180, 150, 60});
    for (Rgb& p : f.pixels()) p.r = static_cast<std::uint8_t>(p.r + rng.below(4));
    video.push_back(std::move(f));
  }
  for (int i : {10, 22, 34, 46, 90, 105}) video[static_cast<std::size_t>(i)] = fixture::solid(16, 12, {255, 255, 255});
  const auto cuts = naive_cut_detect(frame_activity(video, ActivityMetric::MeanRgbL1));
  const std::size_t scenes = 2;
  c.expect(cuts.size() > scenes, "detections " + std::to_string(cuts.size()) + " do not exceed the true scene count");
  c.expect(std::find(cuts.begin(), cuts.end(), 60u) != cuts.end(), "the true cut at frame 60 was missed");
  c.note("naive detector reported " + std::to_string(cuts.size()) + " boundaries for 2 scenes (expected over-firing on strobes)");
}

}  // namespace

int main() {
  bool ok = true;
  ok &= criterion("AC1", "dimensionality conformance", 60.0, ac1);
  ok &= criterion("AC2", "oracle equivalence", 60.0, ac2);
  ok &= criterion("AC3", "signal-level checks", 60.0, ac3);
  ok &= criterion("AC4", "synthetic fusion experiment", 180.0, ac4);
  ok &= criterion("AC5", "ensemble arithmetic", 60.0, ac5);
  ok &= criterion("AC6", "I/O bit-exactness and reproducibility", 60.0, ac6);
  ok &= criterion("AC7", "naive cut detector over-fires on strobes", 60.0, ac7);
  return ok ? 0 : 1;
}
