#pragma once

// Visual-concept score aggregation and salient-concept ranking, plus LBP
// face descriptors with chi-square nearest-neighbour matching and the
// log-penalised per-label scoring of frame-level predictions.

#include <avmir/aggregate.hpp>

#include <map>
#include <set>
#include <string>

namespace avmir {

/// Per-frame concept probability vectors over a fixed vocabulary.
struct ConceptScoreSequence {
  std::vector<std::string> vocabulary;
  Matrix rows;  // frames x vocabulary

  void validate(double tolerance = 1e-4) const {
    if (rows.cols() != vocabulary.size()) throw InputError("concept rows do not match the vocabulary size");
    for (std::size_t r = 0; r < rows.rows(); ++r) {
      double s = 0.0;
      for (double v : rows.row(r)) {
        if (!(v >= 0.0 && v <= 1.0)) throw InputError("concept score outside [0, 1] in frame " + std::to_string(r));
        s += v;
      }
      if (std::abs(s - 1.0) > tolerance) throw InputError("concept scores of frame " + std::to_string(r) + " do not sum to 1");
    }
  }
};

enum class ConceptPreset { Mean, Std, Max, MaxMean, MaxStd };

inline ConceptPreset parse_concept_preset(std::string_view s) {
  if (s == "mean") return ConceptPreset::Mean;
  if (s == "std") return ConceptPreset::Std;
  if (s == "max") return ConceptPreset::Max;
  if (s == "max+mean") return ConceptPreset::MaxMean;
  if (s == "max+std") return ConceptPreset::MaxStd;
  throw InputError("unknown concept preset '" + std::string(s) + "'");
}

/// Generic per-concept moments, concept-major.
inline std::vector<double> aggregate_concepts(const ConceptScoreSequence& seq, const MomentSpec& spec) {
  if (seq.rows.rows() == 0) throw InputError("cannot aggregate an empty concept sequence");
  return moments(seq.rows, spec);
}

/// Preset aggregation; two-moment presets concatenate whole blocks
/// (all maxima, then all means / deviations).
inline std::vector<double> aggregate_concepts(const ConceptScoreSequence& seq, ConceptPreset preset) {
  const auto block = [&](Moment m) { return aggregate_concepts(seq, MomentSpec{m}); };
  switch (preset) {
    case ConceptPreset::Mean: return block(Moment::Mean);
    case ConceptPreset::Std: return block(Moment::StdDev);
    case ConceptPreset::Max: return block(Moment::Max);
    case ConceptPreset::MaxMean: {
      auto out = block(Moment::Max);
      const auto m = block(Moment::Mean);
      out.insert(out.end(), m.begin(), m.end());
      return out;
    }
    case ConceptPreset::MaxStd: {
      auto out = block(Moment::Max);
      const auto m = block(Moment::StdDev);
      out.insert(out.end(), m.begin(), m.end());
      return out;
    }
  }
  throw InvariantError("unknown concept preset");
}

/// Mean concept frequencies of one class.
struct ClassConceptProfile {
  std::string label;
  std::vector<std::string> vocabulary;
  std::vector<double> frequency;
};

struct SalientConcept {
  std::string concept_name;
  double score = 0.0;
};

struct SalientList {
  std::string label;
  std::vector<SalientConcept> ranked;
};

/// For class c and concept t: score = min over other classes c' of
/// freq(c, t) - freq(c', t). Ranked descending; ties keep vocabulary order.
inline std::vector<SalientList> salient_concepts(std::span<const ClassConceptProfile> classes,
                                                 const std::set<std::string>& exclusions = {}) {
  if (classes.size() < 2) throw InputError("salience needs at least two classes");
  const auto& vocab = classes.front().vocabulary;
  for (const auto& c : classes) {
    if (c.vocabulary != vocab) throw InputError("concept vocabularies differ between classes");
    if (c.frequency.size() != vocab.size()) throw InputError("concept frequencies do not match the vocabulary");
  }
  std::vector<SalientList> out;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    SalientList list{classes[c].label, {}};
    for (std::size_t t = 0; t < vocab.size(); ++t) {
      if (exclusions.contains(vocab[t])) continue;
      double score = std::numeric_limits<double>::infinity();
      for (std::size_t o = 0; o < classes.size(); ++o) {
        if (o != c) score = std::min(score, classes[c].frequency[t] - classes[o].frequency[t]);
      }
      list.ranked.push_back({vocab[t], score});
    }
    std::stable_sort(list.ranked.begin(), list.ranked.end(),
                     [](const SalientConcept& a, const SalientConcept& b) { return a.score > b.score; });
    out.push_back(std::move(list));
  }
  return out;
}

// ------------------------------------------------------------------- Faces

inline constexpr int kLbpGrid = 8;
inline constexpr std::size_t kLbpBins = 256;

/// Concatenated per-cell LBP histograms, each normalised to unit sum.
struct FaceDescriptor {
  int grid = kLbpGrid;
  std::vector<double> histograms;  // grid*grid*256
};

/// 8-neighbour LBP codes. Neighbours are visited clockwise from the top-left
/// and fill bits 7..0; a neighbour >= centre sets its bit. Borders replicate
/// edge pixels.
inline Grid<std::uint8_t> lbp_codes(const GrayRaster& img) {
  static constexpr int dy[8] = {-1, -1, -1, 0, 1, 1, 1, 0};
  static constexpr int dx[8] = {-1, 0, 1, 1, 1, 0, -1, -1};
  const auto h = static_cast<int>(img.rows()), w = static_cast<int>(img.cols());
  Grid<std::uint8_t> codes(img.rows(), img.cols());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t c = img(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
      unsigned code = 0;
      for (int k = 0; k < 8; ++k) {
        const int yy = std::clamp(y + dy[k], 0, h - 1), xx = std::clamp(x + dx[k], 0, w - 1);
        if (img(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) >= c) code |= 1u << (7 - k);
      }
      codes(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = static_cast<std::uint8_t>(code);
    }
  }
  return codes;
}

inline FaceDescriptor lbp_descriptor(const GrayRaster& face, int grid = kLbpGrid) {
  if (face.rows() < static_cast<std::size_t>(grid) || face.cols() < static_cast<std::size_t>(grid)) {
    throw InputError("face raster smaller than the " + std::to_string(grid) + "x" + std::to_string(grid) + " grid");
  }
  const Grid<std::uint8_t> codes = lbp_codes(face);
  const auto g = static_cast<std::size_t>(grid);
  FaceDescriptor d{grid, std::vector<double>(g * g * kLbpBins, 0.0)};
  for (std::size_t cy = 0; cy < g; ++cy) {
    const std::size_t r0 = cy * face.rows() / g, r1 = (cy + 1) * face.rows() / g;
    for (std::size_t cx = 0; cx < g; ++cx) {
      const std::size_t c0 = cx * face.cols() / g, c1 = (cx + 1) * face.cols() / g;
      double* hist = d.histograms.data() + (cy * g + cx) * kLbpBins;
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) hist[codes(r, c)] += 1.0;
      }
      const double n = static_cast<double>((r1 - r0) * (c1 - c0));
      for (std::size_t b = 0; b < kLbpBins; ++b) hist[b] /= n;
    }
  }
  return d;
}

/// Chi-square histogram distance: sum of (a-b)^2 / (a+b) over bins with a+b > 0.
inline double chi_square(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("chi-square histograms differ in length");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double s = a[i] + b[i];
    if (s > 0.0) d += (a[i] - b[i]) * (a[i] - b[i]) / s;
  }
  return d;
}

struct LabeledFace {
  std::string label;
  FaceDescriptor descriptor;
};

struct FaceMatch {
  std::string label;
  double distance = 0.0;
  double confidence = 0.0;  // 1 / (1 + distance)
  std::size_t gallery_index = 0;
};

inline FaceMatch recognize_face(const FaceDescriptor& probe, std::span<const LabeledFace> gallery) {
  if (gallery.empty()) throw InputError("face gallery is empty");
  FaceMatch best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    const double d = chi_square(probe.histograms, gallery[i].descriptor.histograms);
    if (d < best.distance) {
      best = {gallery[i].label, d, 0.0, i};
    }
  }
  best.confidence = 1.0 / (1.0 + best.distance);
  return best;
}

struct LabelScore {
  std::size_t count = 0;
  double mean_confidence = 0.0;
  double score = 0.0;  // mean confidence / ln(max(count, 2))
};

struct ArtistScoreBoard {
  std::map<std::string, LabelScore> labels;
  std::string winner;
};

/// Per-label mean confidence divided by the natural log of the label's
/// prediction count (count 1 uses ln 2). Ties go to the lexicographically
/// first label.
inline ArtistScoreBoard artist_score(std::span<const std::pair<std::string, double>> predictions) {
  if (predictions.empty()) throw InputError("no frame predictions to score");
  ArtistScoreBoard board;
  for (const auto& [label, conf] : predictions) {
    LabelScore& s = board.labels[label];
    ++s.count;
    s.mean_confidence += conf;
  }
  double best = -std::numeric_limits<double>::infinity();
  for (auto& [label, s] : board.labels) {
    s.mean_confidence /= static_cast<double>(s.count);
    s.score = s.mean_confidence / std::log(static_cast<double>(std::max<std::size_t>(s.count, 2)));
    if (s.score > best) {
      best = s.score;
      board.winner = label;
    }
  }
  return board;
}

}  // namespace avmir
