#pragma once

// Datasets, standardisation, kNN / Gaussian naive Bayes / linear SVM
// classifiers, stratified repeated cross-validation, early fusion and the
// bagged, confidence-weighted multimodal ensemble.

#include <avmir/core.hpp>

#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <string_view>

namespace avmir {

/// Feature matrix with class labels, schema and optional group keys.
struct LabeledDataset {
  Matrix features;                       // N x D
  std::vector<int> labels;               // N, indices into class_names
  std::vector<std::string> class_names;
  std::vector<std::string> schema;       // D feature names
  std::vector<std::string> groups;       // empty or N group keys
  std::vector<std::string> ids;          // empty or N sample ids

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dims() const noexcept { return features.cols(); }
  int class_count() const noexcept { return static_cast<int>(class_names.size()); }

  void validate() const {
    if (features.rows() != labels.size()) throw InputError("feature rows and labels differ in count");
    if (schema.size() != features.cols()) throw InputError("schema size differs from feature count");
    if (!groups.empty() && groups.size() != labels.size()) throw InputError("group keys differ in count from samples");
    if (!ids.empty() && ids.size() != labels.size()) throw InputError("sample ids differ in count from samples");
    for (int l : labels) {
      if (l < 0 || l >= class_count()) throw InputError("label outside the declared class set");
    }
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (!std::isfinite(features.values()[i])) {
        throw InputError("non-finite feature value in row " + std::to_string(i / std::max<std::size_t>(1, features.cols())));
      }
    }
  }

  /// Class ids assigned in first-seen order.
  static LabeledDataset from_string_labels(Matrix features, std::span<const std::string> labels,
                                           std::vector<std::string> schema) {
    LabeledDataset d;
    d.features = std::move(features);
    d.schema = std::move(schema);
    std::map<std::string, int> ids;
    for (const auto& l : labels) {
      auto [it, inserted] = ids.try_emplace(l, static_cast<int>(d.class_names.size()));
      if (inserted) d.class_names.push_back(l);
      d.labels.push_back(it->second);
    }
    d.validate();
    return d;
  }

  LabeledDataset subset(std::span<const std::size_t> rows) const {
    LabeledDataset out;
    out.class_names = class_names;
    out.schema = schema;
    out.features = Matrix(rows.size(), dims());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy(features.row(rows[i]).begin(), features.row(rows[i]).end(), out.features.row(i).begin());
      out.labels.push_back(labels[rows[i]]);
      if (!groups.empty()) out.groups.push_back(groups[rows[i]]);
      if (!ids.empty()) out.ids.push_back(ids[rows[i]]);
    }
    return out;
  }
};

/// Per-dimension standardisation; sigma = 1 is substituted for constant dims.
class Scaler {
 public:
  static Scaler fit(const Matrix& x) {
    if (x.rows() == 0) throw InputError("cannot fit a scaler on zero rows");
    Scaler s;
    s.mean_.assign(x.cols(), 0.0);
    s.std_.assign(x.cols(), 1.0);
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const std::vector<double> col = x.column(c);
      const stats::CentralMoments cm = stats::central_moments(col);
      s.mean_[c] = cm.constant ? col.front() : stats::mean(col);
      const double sd = std::sqrt(cm.m2);
      s.std_[c] = cm.constant || sd <= 0.0 ? 1.0 : sd;
    }
    return s;
  }

  static Scaler identity(std::size_t dims) {
    Scaler s;
    s.mean_.assign(dims, 0.0);
    s.std_.assign(dims, 1.0);
    return s;
  }

  std::vector<double> transform(std::span<const double> row) const {
    check(row.size());
    std::vector<double> out(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) out[c] = (row[c] - mean_[c]) / std_[c];
    return out;
  }

  Matrix transform(const Matrix& x) const {
    check(x.cols());
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - mean_[c]) / std_[c];
    }
    return out;
  }

  Matrix inverse_transform(const Matrix& z) const {
    check(z.cols());
    Matrix out(z.rows(), z.cols());
    for (std::size_t r = 0; r < z.rows(); ++r) {
      for (std::size_t c = 0; c < z.cols(); ++c) out(r, c) = z(r, c) * std_[c] + mean_[c];
    }
    return out;
  }

  const std::vector<double>& means() const noexcept { return mean_; }
  const std::vector<double>& stddevs() const noexcept { return std_; }

 private:
  void check(std::size_t d) const {
    if (d != mean_.size()) throw InputError("scaler dimension mismatch");
  }
  std::vector<double> mean_;
  std::vector<double> std_;
};

struct Prediction {
  int label = 0;
  std::vector<double> scores;  // per class
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual void fit(const Matrix& x, std::span<const int> y, int classes) = 0;
  virtual Prediction predict(std::span<const double> row) const = 0;
};

enum class Metric { L1, L2 };

class KnnClassifier final : public Classifier {
 public:
  KnnClassifier(int k, Metric metric) : k_(k), metric_(metric) {
    if (k < 1) throw InputError("k must be >= 1");
  }

  void fit(const Matrix& x, std::span<const int> y, int classes) override {
    if (x.rows() == 0) throw InputError("kNN training set is empty");
    if (static_cast<std::size_t>(k_) > x.rows()) throw InputError("k exceeds the number of training samples");
    x_ = x;
    y_.assign(y.begin(), y.end());
    classes_ = classes;
  }

  double distance(std::span<const double> a, std::span<const double> b) const {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double diff = a[i] - b[i];
      d += metric_ == Metric::L1 ? std::abs(diff) : diff * diff;
    }
    return metric_ == Metric::L1 ? d : std::sqrt(d);
  }

  /// Indices of the k nearest training rows, nearest first (ties by index).
  std::vector<std::size_t> neighbours(std::span<const double> row) const {
    std::vector<std::pair<double, std::size_t>> d(x_.rows());
    for (std::size_t i = 0; i < x_.rows(); ++i) d[i] = {distance(row, x_.row(i)), i};
    const auto k = static_cast<std::size_t>(k_);
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = d[i].second;
    return out;
  }

  // Majority vote; ties by smaller summed distance, then lower class id.
  Prediction predict(std::span<const double> row) const override {
    if (row.size() != x_.cols()) throw InputError("kNN query dimension mismatch");
    std::vector<double> votes(static_cast<std::size_t>(classes_), 0.0), dist_sum(static_cast<std::size_t>(classes_), 0.0);
    for (std::size_t i : neighbours(row)) {
      const auto c = static_cast<std::size_t>(y_[i]);
      votes[c] += 1.0;
      dist_sum[c] += distance(row, x_.row(i));
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < votes.size(); ++c) {
      if (votes[c] > votes[best] || (votes[c] == votes[best] && votes[c] > 0 && dist_sum[c] < dist_sum[best])) best = c;
    }
    for (double& v : votes) v /= static_cast<double>(k_);
    return {static_cast<int>(best), votes};
  }

 private:
  int k_;
  Metric metric_;
  Matrix x_;
  std::vector<int> y_;
  int classes_ = 0;
};

class GaussianNaiveBayes final : public Classifier {
 public:
  static constexpr double kVarianceFloor = 1e-9;

  void fit(const Matrix& x, std::span<const int> y, int classes) override {
    if (x.rows() == 0) throw InputError("naive Bayes training set is empty");
    const std::size_t d = x.cols(), k = static_cast<std::size_t>(classes);
    mean_ = Matrix(k, d, 0.0);
    var_ = Matrix(k, d, 0.0);
    log_prior_.assign(k, -std::numeric_limits<double>::infinity());
    std::vector<double> count(k, 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const auto c = static_cast<std::size_t>(y[r]);
      count[c] += 1.0;
      for (std::size_t j = 0; j < d; ++j) mean_(c, j) += x(r, j);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0.0) continue;
      for (std::size_t j = 0; j < d; ++j) mean_(c, j) /= count[c];
      log_prior_[c] = std::log(count[c] / static_cast<double>(x.rows()));
    }
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const auto c = static_cast<std::size_t>(y[r]);
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = x(r, j) - mean_(c, j);
        var_(c, j) += diff * diff;
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < d; ++j) var_(c, j) = std::max(kVarianceFloor, count[c] > 0.0 ? var_(c, j) / count[c] : 0.0);
    }
  }

  /// Unnormalised log posteriors per class (-inf for classes absent in training).
  std::vector<double> log_posterior(std::span<const double> row) const {
    std::vector<double> lp(log_prior_.size());
    for (std::size_t c = 0; c < lp.size(); ++c) {
      if (!std::isfinite(log_prior_[c])) {
        lp[c] = -std::numeric_limits<double>::infinity();
        continue;
      }
      double s = log_prior_[c];
      for (std::size_t j = 0; j < row.size(); ++j) {
        const double diff = row[j] - mean_(c, j);
        s -= 0.5 * std::log(kTwoPi * var_(c, j)) + diff * diff / (2.0 * var_(c, j));
      }
      lp[c] = s;
    }
    return lp;
  }

  Prediction predict(std::span<const double> row) const override {
    if (row.size() != mean_.cols()) throw InputError("naive Bayes query dimension mismatch");
    const std::vector<double> lp = log_posterior(row);
    std::size_t best = 0;
    for (std::size_t c = 1; c < lp.size(); ++c) {
      if (lp[c] > lp[best]) best = c;
    }
    std::vector<double> p(lp.size(), 0.0);
    double z = 0.0;
    for (std::size_t c = 0; c < lp.size(); ++c) {
      p[c] = std::isfinite(lp[c]) ? std::exp(lp[c] - lp[best]) : 0.0;
      z += p[c];
    }
    for (double& v : p) v /= z;
    return {static_cast<int>(best), p};
  }

 private:
  Matrix mean_;
  Matrix var_;
  std::vector<double> log_prior_;
};

/// One-vs-rest linear SVM (hinge loss, L2 penalty) trained with seeded
/// stochastic subgradient steps; the final weights average the last epoch.
class LinearSvm final : public Classifier {
 public:
  LinearSvm(double c, int epochs, std::uint64_t seed) : c_(c), epochs_(epochs), seed_(seed) {
    if (!(c > 0.0)) throw InputError("SVM complexity parameter must be positive");
    if (epochs < 1) throw InputError("SVM epochs must be >= 1");
  }

  void fit(const Matrix& x, std::span<const int> y, int classes) override {
    const std::size_t n = x.rows(), d = x.cols();
    std::vector<char> present(static_cast<std::size_t>(classes), 0);
    for (int l : y) present[static_cast<std::size_t>(l)] = 1;
    if (std::count(present.begin(), present.end(), 1) < 2) throw InputError("linear SVM needs at least two classes");
    const double lambda = 1.0 / (c_ * static_cast<double>(n));
    weights_ = Matrix(static_cast<std::size_t>(classes), d + 1, 0.0);
    for (std::size_t cls = 0; cls < static_cast<std::size_t>(classes); ++cls) {
      if (!present[cls]) {
        weights_(cls, d) = -1e9;  // never predicted
        continue;
      }
      Rng rng(seed_ ^ (0x9E3779B97F4A7C15ULL * (cls + 1)));
      std::vector<double> w(d + 1, 0.0), avg(d + 1, 0.0);
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::size_t t = 0;
      for (int e = 0; e < epochs_; ++e) {
        rng.shuffle(order);
        const bool last = e + 1 == epochs_;
        for (std::size_t i : order) {
          ++t;
          const double eta = 1.0 / (lambda * static_cast<double>(t));
          const double target = y[i] == static_cast<int>(cls) ? 1.0 : -1.0;
          double margin = w[d];
          for (std::size_t j = 0; j < d; ++j) margin += w[j] * x(i, j);
          const double shrink = 1.0 - eta * lambda;
          for (double& v : w) v *= shrink;
          if (target * margin < 1.0) {
            for (std::size_t j = 0; j < d; ++j) w[j] += eta * target * x(i, j);
            w[d] += eta * target;
          }
          if (last) {
            for (std::size_t j = 0; j <= d; ++j) avg[j] += w[j];
          }
        }
      }
      for (std::size_t j = 0; j <= d; ++j) weights_(cls, j) = avg[j] / static_cast<double>(n);
    }
  }

  Prediction predict(std::span<const double> row) const override {
    const std::size_t d = weights_.cols() - 1;
    if (row.size() != d) throw InputError("SVM query dimension mismatch");
    std::vector<double> margins(weights_.rows());
    std::size_t best = 0;
    for (std::size_t c = 0; c < weights_.rows(); ++c) {
      double m = weights_(c, d);
      for (std::size_t j = 0; j < d; ++j) m += weights_(c, j) * row[j];
      margins[c] = m;
      if (m > margins[best]) best = c;
    }
    return {static_cast<int>(best), margins};
  }

  const Matrix& weights() const noexcept { return weights_; }

 private:
  double c_;
  int epochs_;
  std::uint64_t seed_;
  Matrix weights_;
};

/// Always predicts the most frequent training class (lowest id on ties).
class MajorityClassifier final : public Classifier {
 public:
  void fit(const Matrix&, std::span<const int> y, int classes) override {
    std::vector<std::size_t> count(static_cast<std::size_t>(classes), 0);
    for (int l : y) ++count[static_cast<std::size_t>(l)];
    label_ = static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
    classes_ = classes;
  }
  Prediction predict(std::span<const double>) const override {
    std::vector<double> s(static_cast<std::size_t>(classes_), 0.0);
    s[static_cast<std::size_t>(label_)] = 1.0;
    return {label_, s};
  }

 private:
  int label_ = 0;
  int classes_ = 0;
};

enum class ClassifierKind { Knn, NaiveBayes, LinearSvm, Majority };

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::LinearSvm;
  int k = 1;
  Metric metric = Metric::L2;
  double c = 1.0;
  int epochs = 30;
  std::uint64_t seed = 0;
};

inline ClassifierKind parse_classifier(std::string_view s) {
  if (s == "knn") return ClassifierKind::Knn;
  if (s == "nb") return ClassifierKind::NaiveBayes;
  if (s == "svm") return ClassifierKind::LinearSvm;
  if (s == "majority") return ClassifierKind::Majority;
  throw InputError("unknown classifier '" + std::string(s) + "'");
}

inline std::unique_ptr<Classifier> make_classifier(const ClassifierSpec& spec) {
  switch (spec.kind) {
    case ClassifierKind::Knn: return std::make_unique<KnnClassifier>(spec.k, spec.metric);
    case ClassifierKind::NaiveBayes: return std::make_unique<GaussianNaiveBayes>();
    case ClassifierKind::LinearSvm: return std::make_unique<LinearSvm>(spec.c, spec.epochs, spec.seed);
    case ClassifierKind::Majority: return std::make_unique<MajorityClassifier>();
  }
  throw InvariantError("unknown classifier kind");
}

enum class Normalization {
  TrainStatistics,  // test rows scaled with the training fold's statistics
  Separate,         // train and test each standardised with their own statistics
  None,
};

/// Scaler + classifier fitted together.
class Model {
 public:
  Model(const LabeledDataset& train, const ClassifierSpec& spec, Normalization norm = Normalization::TrainStatistics)
      : norm_(norm), classes_(train.class_count()) {
    scaler_ = norm == Normalization::None ? Scaler::identity(train.dims()) : Scaler::fit(train.features);
    clf_ = make_classifier(spec);
    clf_->fit(scaler_.transform(train.features), train.labels, classes_);
  }

  Prediction predict(std::span<const double> row) const { return clf_->predict(scaler_.transform(row)); }

  /// Batch prediction honouring the normalisation mode.
  std::vector<Prediction> predict(const Matrix& rows) const {
    const Matrix z = norm_ == Normalization::Separate ? Scaler::fit(rows).transform(rows) : scaler_.transform(rows);
    std::vector<Prediction> out;
    out.reserve(rows.rows());
    for (std::size_t r = 0; r < z.rows(); ++r) out.push_back(clf_->predict(z.row(r)));
    return out;
  }

  int class_count() const noexcept { return classes_; }

 private:
  Normalization norm_;
  int classes_;
  Scaler scaler_;
  std::unique_ptr<Classifier> clf_;
};

// --------------------------------------------------------- cross-validation

struct FoldAssignment {
  int k = 0;
  std::vector<std::vector<int>> fold_of;  // [repeat][sample] -> fold
  std::vector<std::string> warnings;
};

/// Mix a base seed with a stream index (splitmix64 finaliser).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Per repeat and class, members are shuffled and dealt round-robin into k
/// folds; the dealing offset carries over between classes so fold sizes stay
/// balanced. k is reduced (with a warning) when a class has fewer than k members.
inline FoldAssignment stratified_kfold(std::span<const int> labels, int k, int repeats, std::uint64_t seed) {
  if (labels.empty()) throw InputError("cannot build folds for an empty dataset");
  if (k < 2) throw InputError("need at least 2 folds");
  if (repeats < 1) throw InputError("need at least 1 repeat");
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  FoldAssignment out;
  std::size_t smallest = labels.size();
  for (const auto& [c, m] : members) smallest = std::min(smallest, m.size());
  out.k = k;
  if (smallest < static_cast<std::size_t>(k)) {
    out.k = static_cast<int>(std::max<std::size_t>(2, smallest));
    out.warnings.push_back("smallest class has " + std::to_string(smallest) + " members; folds reduced from " +
                           std::to_string(k) + " to " + std::to_string(out.k));
  }
  for (int r = 0; r < repeats; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    std::vector<int> fold(labels.size(), 0);
    std::size_t offset = 0;
    for (const auto& [c, m] : members) {
      std::vector<std::size_t> shuffled = m;
      rng.shuffle(shuffled);
      for (std::size_t j = 0; j < shuffled.size(); ++j) {
        fold[shuffled[j]] = static_cast<int>((offset + j) % static_cast<std::size_t>(out.k));
      }
      offset = (offset + shuffled.size()) % static_cast<std::size_t>(out.k);
    }
    out.fold_of.push_back(std::move(fold));
  }
  return out;
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct CvResult {
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::vector<double> fold_accuracies;
  std::vector<ClassMetrics> per_class;  // averaged over folds and repeats
  Grid<long> confusion;                 // true x predicted, summed
  int folds = 0;
  int repeats = 0;
};

/// Precision / recall / F1 of one confusion matrix; undefined ratios are 0.
inline std::vector<ClassMetrics> class_metrics(const Grid<long>& cm) {
  const std::size_t k = cm.rows();
  std::vector<ClassMetrics> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    long tp = cm(c, c), pred = 0, actual = 0;
    for (std::size_t o = 0; o < k; ++o) {
      pred += cm(o, c);
      actual += cm(c, o);
    }
    out[c].precision = pred > 0 ? static_cast<double>(tp) / static_cast<double>(pred) : 0.0;
    out[c].recall = actual > 0 ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    const double s = out[c].precision + out[c].recall;
    out[c].f1 = s > 0.0 ? 2.0 * out[c].precision * out[c].recall / s : 0.0;
  }
  return out;
}

inline CvResult cross_validate(const LabeledDataset& data, const ClassifierSpec& spec, const FoldAssignment& folds,
                               Normalization norm = Normalization::TrainStatistics) {
  data.validate();
  const auto k = static_cast<std::size_t>(data.class_count());
  CvResult res;
  res.folds = folds.k;
  res.repeats = static_cast<int>(folds.fold_of.size());
  res.confusion = Grid<long>(k, k, 0);
  res.per_class.assign(k, {});
  std::size_t evaluated = 0;
  for (std::size_t r = 0; r < folds.fold_of.size(); ++r) {
    const auto& fold_of = folds.fold_of[r];
    if (fold_of.size() != data.size()) throw InputError("fold assignment does not match the dataset");
    for (int f = 0; f < folds.k; ++f) {
      std::vector<std::size_t> train_idx, test_idx;
      for (std::size_t i = 0; i < data.size(); ++i) (fold_of[i] == f ? test_idx : train_idx).push_back(i);
      if (test_idx.empty() || train_idx.empty()) continue;
      ClassifierSpec fold_spec = spec;
      fold_spec.seed = derive_seed(spec.seed, r * 1000 + static_cast<std::size_t>(f));
      const LabeledDataset train = data.subset(train_idx);
      const LabeledDataset test = data.subset(test_idx);
      const Model model(train, fold_spec, norm);
      const std::vector<Prediction> preds = model.predict(test.features);
      Grid<long> cm(k, k, 0);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < preds.size(); ++i) {
        ++cm(static_cast<std::size_t>(test.labels[i]), static_cast<std::size_t>(preds[i].label));
        correct += preds[i].label == test.labels[i] ? 1 : 0;
      }
      res.fold_accuracies.push_back(static_cast<double>(correct) / static_cast<double>(preds.size()));
      const auto m = class_metrics(cm);
      for (std::size_t c = 0; c < k; ++c) {
        res.per_class[c].precision += m[c].precision;
        res.per_class[c].recall += m[c].recall;
        res.per_class[c].f1 += m[c].f1;
      }
      for (std::size_t i = 0; i < cm.size(); ++i) res.confusion.values()[i] += cm.values()[i];
      ++evaluated;
    }
  }
  if (evaluated == 0) throw InputError("no fold could be evaluated");
  for (auto& m : res.per_class) {
    m.precision /= static_cast<double>(evaluated);
    m.recall /= static_cast<double>(evaluated);
    m.f1 /= static_cast<double>(evaluated);
  }
  res.mean_accuracy = stats::mean(res.fold_accuracies);
  res.std_accuracy = std::sqrt(stats::variance(res.fold_accuracies));
  return res;
}

// ------------------------------------------------------------- early fusion

struct FusionPart {
  std::string prefix;
  LabeledDataset data;
};

/// Column concatenation in argument order; schema names are prefixed.
/// Zero-column parts contribute nothing.
inline LabeledDataset early_fuse(std::span<const FusionPart> parts) {
  if (parts.empty()) throw InputError("nothing to fuse");
  const LabeledDataset& ref = parts.front().data;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.data.size() != ref.size()) throw InputError("fusion parts differ in row count");
    if (p.data.labels != ref.labels || p.data.class_names != ref.class_names) throw InputError("fusion parts disagree on labels");
    if (!ref.ids.empty() && !p.data.ids.empty() && p.data.ids != ref.ids) throw InputError("fusion parts disagree on sample ids");
    total += p.data.dims();
  }
  LabeledDataset out;
  out.labels = ref.labels;
  out.class_names = ref.class_names;
  out.groups = ref.groups;
  out.ids = ref.ids;
  out.features = Matrix(ref.size(), total);
  std::size_t col = 0;
  for (const auto& p : parts) {
    for (std::size_t j = 0; j < p.data.dims(); ++j) {
      out.schema.push_back(p.prefix.empty() ? p.data.schema[j] : p.prefix + "_" + p.data.schema[j]);
      for (std::size_t r = 0; r < ref.size(); ++r) out.features(r, col) = p.data.features(r, j);
      ++col;
    }
    if (out.groups.empty()) out.groups = p.data.groups;
    if (out.ids.empty()) out.ids = p.data.ids;
  }
  return out;
}

// ------------------------------------------------------------------ bagging

struct EnsembleMember {
  std::string modality;
  std::shared_ptr<const Model> model;
  double confidence = 0.0;  // held-out accuracy, also the vote weight
};

struct BaggingOptions {
  int members = 10;
  double holdout_fraction = 0.10;
  std::uint64_t seed = 0;
  int max_retries = 100;
  Normalization normalization = Normalization::TrainStatistics;
};

/// Each member is trained on a seeded random subsample; the held-out
/// remainder of the training set gives its confidence.
inline std::vector<EnsembleMember> bagging_train(const LabeledDataset& train, const ClassifierSpec& spec,
                                                 const BaggingOptions& opt, const std::string& modality) {
  train.validate();
  if (opt.members < 1) throw InputError("ensemble needs at least one member");
  if (!(opt.holdout_fraction > 0.0 && opt.holdout_fraction < 1.0)) throw InputError("holdout fraction must be in (0, 1)");
  const std::size_t n = train.size();
  const auto hold = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(opt.holdout_fraction * static_cast<double>(n))));
  std::set<int> classes(train.labels.begin(), train.labels.end());
  if (n <= hold || n - hold < classes.size()) throw InputError("training set too small for the requested holdout");

  std::vector<EnsembleMember> out;
  for (int m = 0; m < opt.members; ++m) {
    Rng rng(derive_seed(opt.seed, static_cast<std::uint64_t>(m)));
    std::vector<std::size_t> order(n);
    bool ok = false;
    for (int attempt = 0; attempt <= opt.max_retries && !ok; ++attempt) {
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(order);
      std::set<int> seen;
      for (std::size_t i = hold; i < n; ++i) seen.insert(train.labels[order[i]]);
      ok = seen == classes;
    }
    if (!ok) throw InputError("could not draw a subsample containing every class");
    const std::vector<std::size_t> held(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(hold));
    const std::vector<std::size_t> fit_idx(order.begin() + static_cast<std::ptrdiff_t>(hold), order.end());
    ClassifierSpec member_spec = spec;
    member_spec.seed = derive_seed(spec.seed, 7919 + static_cast<std::uint64_t>(m));
    auto model = std::make_shared<const Model>(train.subset(fit_idx), member_spec, opt.normalization);
    std::size_t correct = 0;
    for (std::size_t i : held) correct += model->predict(train.features.row(i)).label == train.labels[i] ? 1 : 0;
    out.push_back({modality, std::move(model), static_cast<double>(correct) / static_cast<double>(hold)});
  }
  return out;
}

struct Vote {
  int label = 0;
  double weight = 0.0;
};

struct VoteResult {
  int label = 0;
  std::vector<double> sums;
};

/// Weighted majority: per-label weight sums in vote order, argmax with ties
/// to the lowest class id.
inline VoteResult weighted_vote(std::span<const Vote> votes, int classes) {
  if (votes.empty()) throw InputError("no votes cast");
  VoteResult r{0, std::vector<double>(static_cast<std::size_t>(classes), 0.0)};
  for (const Vote& v : votes) {
    if (v.label < 0 || v.label >= classes) throw InputError("vote for an unknown class");
    r.sums[static_cast<std::size_t>(v.label)] += v.weight;
  }
  for (std::size_t c = 1; c < r.sums.size(); ++c) {
    if (r.sums[c] > r.sums[static_cast<std::size_t>(r.label)]) r.label = static_cast<int>(c);
  }
  return r;
}

/// Every member of every modality votes its predicted label for that
/// modality's input row with weight = member confidence.
inline VoteResult ensemble_predict(std::span<const std::vector<EnsembleMember>> modalities,
                                   std::span<const std::vector<double>> inputs, int classes) {
  if (modalities.size() != inputs.size()) throw InputError("one input row per modality required");
  std::vector<Vote> votes;
  for (std::size_t m = 0; m < modalities.size(); ++m) {
    for (const EnsembleMember& member : modalities[m]) {
      votes.push_back({member.model->predict(inputs[m]).label, member.confidence});
    }
  }
  return weighted_vote(votes, classes);
}

}  // namespace avmir
