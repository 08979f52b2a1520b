// avmir: command-line front end.

#include <avmir/aggregate.hpp>
#include <avmir/concepts.hpp>
#include <avmir/io.hpp>
#include <avmir/ml.hpp>
#include <avmir/shotviz.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

namespace {

using namespace avmir;
using json = nlohmann::ordered_json;

// JSON config: {"option": value} applies to the active subcommand;
// {"<subcommand>": {...}} targets a named one.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* app) : app_(app) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config: top level must be an object");
    std::vector<std::string> active;
    for (const CLI::App* sub : app_->get_subcommands()) active.push_back(sub->get_name());
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        for (const auto& [k2, v2] : value.items()) items.push_back(item({key}, k2, v2));
      } else {
        items.push_back(item(active, key, value));
      }
    }
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static CLI::ConfigItem item(std::vector<std::string> parents, const std::string& name, const nlohmann::json& v) {
    CLI::ConfigItem it;
    it.parents = std::move(parents);
    it.name = name;
    if (v.is_array()) {
      for (const auto& e : v) it.inputs.push_back(scalar(e));
    } else {
      it.inputs.push_back(scalar(v));
    }
    return it;
  }

  const CLI::App* app_;
};

/// Runs f(i) for i in [0, n) on `jobs` threads; the lowest-index failure is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& f) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// All option values of a subcommand, sorted by name, for run.json.
json describe_run(const CLI::App& sub) {
  json opts = json::object();
  std::map<std::string, json> sorted;
  for (const CLI::Option* o : sub.get_options()) {
    const std::string name = o->get_single_name();
    if (name.empty() || name == "help") continue;
    json v;
    if (o->count() > 0) {
      const auto results = o->results();
      if (o->get_expected_max() > 1 || results.size() > 1) {
        v = results;
      } else if (o->get_expected_min() == 0) {
        v = true;
      } else {
        v = results.empty() ? "" : results.front();
      }
    } else {
      v = o->get_default_str();
    }
    sorted[name] = v;
  }
  for (auto& [k, v] : sorted) opts[k] = v;
  return json{{"command", sub.get_name()}, {"options", opts}};
}

void write_json(const fs::path& path, const json& j) { write_file_bytes(path, j.dump(2) + "\n"); }

fs::path run_json_path(const fs::path& out, bool out_is_dir) {
  return out_is_dir ? out / "run.json" : (out.has_parent_path() ? out.parent_path() : fs::path(".")) / "run.json";
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = std::min(s.find(',', start), s.size());
    if (comma > start) out.push_back(s.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

std::vector<const ManifestEntry*> sorted_entries(const Manifest& m) {
  std::vector<const ManifestEntry*> v;
  for (const auto& e : m.entries) v.push_back(&e);
  std::sort(v.begin(), v.end(), [](auto* a, auto* b) { return a->id < b->id; });
  return v;
}

/// Builds a dataset from per-track vectors (already sorted by id).
LabeledDataset build_dataset(const std::vector<const ManifestEntry*>& entries, const std::vector<std::vector<double>>& rows,
                             std::vector<std::string> schema, const std::string& group_key = "artist") {
  std::vector<std::string> labels;
  for (auto* e : entries) labels.push_back(e->label);
  LabeledDataset d = LabeledDataset::from_string_labels(stack_rows(rows), labels, std::move(schema));
  for (auto* e : entries) {
    d.ids.push_back(e->id);
    const std::string& g = group_key == "album" ? e->album : e->artist;
    if (!g.empty()) d.groups.push_back(g);
  }
  if (d.groups.size() != d.ids.size()) d.groups.clear();
  return d;
}

void print_table(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::size_t w = 0;
  for (const auto& [k, v] : rows) w = std::max(w, k.size());
  for (const auto& [k, v] : rows) std::cout << k << std::string(w - k.size() + 2, ' ') << v << "\n";
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ------------------------------------------------------------------ commands

struct AudioArgs {
  std::string manifest, out, features = "rp,rh,ssd";
  int jobs = 1;
};

void cmd_extract_audio(const AudioArgs& a, const CLI::App& sub) {
  const Manifest m = read_manifest(a.manifest);
  const auto entries = sorted_entries(m);
  const auto feats = split_list(a.features);
  static const std::map<std::string, std::pair<std::size_t, std::vector<double> TrackFeatures::*>> table = {
      {"rp", {1440, &TrackFeatures::rp}},   {"rh", {60, &TrackFeatures::rh}},     {"ssd", {168, &TrackFeatures::ssd}},
      {"mvd", {420, &TrackFeatures::mvd}},  {"tssd", {1176, &TrackFeatures::tssd}}, {"trh", {420, &TrackFeatures::trh}}};
  std::vector<std::string> schema;
  for (const auto& f : feats) {
    const auto it = table.find(f);
    if (it == table.end()) throw InputError("unknown audio feature '" + f + "'");
    for (std::size_t k = 0; k < it->second.first; ++k) schema.push_back(f + "_" + std::to_string(k));
  }
  if (feats.empty()) throw InputError("no audio features selected");
  for (auto* e : entries) {
    if (e->audio.empty()) throw InputError("track '" + e->id + "' has no audio path");
  }
  std::vector<std::vector<double>> rows(entries.size());
  parallel_for(entries.size(), a.jobs, [&](std::size_t i) {
    const TrackFeatures tf = track_features(read_wav(entries[i]->audio));
    for (const auto& f : feats) {
      const auto& v = tf.*(table.at(f).second);
      rows[i].insert(rows[i].end(), v.begin(), v.end());
    }
  });
  const LabeledDataset d = build_dataset(entries, rows, schema);
  write_arff(a.out, d, "audio");
  write_json(run_json_path(a.out, false), describe_run(sub));
  print_table({{"tracks", std::to_string(d.size())}, {"dimensions", std::to_string(d.dims())}, {"output", a.out}});
}

struct VisualArgs {
  std::string manifest, frames, out, features = "gcs,gev,cf,cn,ic,waf,lfp", lfp_preset = "paper-80", label = "unknown",
                                     dump_dir, segmentation = "grid";
  double fps = 25.0;
  int stride = 1, jobs = 1;
  bool no_letterbox = false;
};

LfpPreset parse_lfp_preset(const std::string& s) {
  if (s == "paper-80" || s == "paper80") return LfpPreset::Bands80;
  if (s == "paper-60" || s == "paper60") return LfpPreset::Bands60;
  if (s == "full") return LfpPreset::Full;
  throw InputError("unknown LFP preset '" + s + "'");
}

struct VideoResult {
  std::vector<double> values;
  std::vector<std::string> schema;
};

VideoResult extract_video(const fs::path& frames, const std::string& id, const VisualArgs& a) {
  const auto feats = parse_visual_features(a.features);
  VisualOptions opt;
  opt.strip_letterbox = !a.no_letterbox;
  opt.lfp_preset = parse_lfp_preset(a.lfp_preset);
  if (a.segmentation == "quickshift") {
    opt.segmentation.mode = SegmentMode::QuickShift;
  } else if (a.segmentation != "grid") {
    throw InputError("unknown segmentation '" + a.segmentation + "'");
  }
  if (a.stride < 1) throw InputError("stride must be >= 1");
  auto src = open_frames(frames, a.fps);
  VideoAggregator agg(feats, opt);
  std::size_t index = 0;
  while (auto f = src->next()) {
    if (index++ % static_cast<std::size_t>(a.stride) == 0) agg.add(*f);
  }
  const double fps = src->fps() / a.stride;
  if (!a.dump_dir.empty()) {
    std::size_t fi = 0;
    for (VisualFeature vf : feats) {
      if (vf == VisualFeature::Lfp) continue;
      const auto& rows = agg.frame_rows(fi++);
      std::vector<std::string> header{"frame_index"};
      for (std::size_t k = 0; k < frame_feature_dimension(vf); ++k) header.push_back(std::string(visual_feature_name(vf)) + "_" + std::to_string(k));
      Matrix m(rows.size(), rows.front().size() + 1);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        m(r, 0) = static_cast<double>(r * static_cast<std::size_t>(a.stride));
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin() + 1);
      }
      write_file_bytes(fs::path(a.dump_dir) / (id + "_" + std::string(visual_feature_name(vf)) + ".csv"), encode_csv(m, header));
    }
  }
  return {agg.finish(fps), agg.schema(fps)};
}

void cmd_extract_visual(const VisualArgs& a, const CLI::App& sub) {
  std::vector<ManifestEntry> single;
  Manifest m;
  if (!a.manifest.empty() == !a.frames.empty()) throw InputError("give exactly one of --manifest or --frames");
  if (!a.manifest.empty()) {
    m = read_manifest(a.manifest);
  } else {
    ManifestEntry e;
    e.id = fs::path(a.frames).filename().string();
    if (e.id.empty()) e.id = fs::path(a.frames).parent_path().filename().string();
    e.label = a.label;
    e.frames = a.frames;
    m.entries.push_back(e);
  }
  const auto entries = sorted_entries(m);
  for (auto* e : entries) {
    if (e->frames.empty()) throw InputError("track '" + e->id + "' has no frames path");
  }
  std::vector<VideoResult> res(entries.size());
  parallel_for(entries.size(), a.jobs, [&](std::size_t i) { res[i] = extract_video(entries[i]->frames, entries[i]->id, a); });
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < res.size(); ++i) {
    if (res[i].schema != res[0].schema) throw InputError("track '" + entries[i]->id + "' yields a different feature layout");
    rows.push_back(res[i].values);
  }
  const LabeledDataset d = build_dataset(entries, rows, res[0].schema);
  write_arff(a.out, d, "visual");
  write_json(run_json_path(a.out, false), describe_run(sub));
  print_table({{"videos", std::to_string(d.size())}, {"dimensions", std::to_string(d.dims())}, {"output", a.out}});
}

struct AggregateArgs {
  std::string manifest, out, preset = "TEN";
  double segment_seconds = 1.0;
  int jobs = 1;
};

void cmd_aggregate(const AggregateArgs& a, const CLI::App& sub) {
  const Manifest m = read_manifest(a.manifest);
  const auto entries = sorted_entries(m);
  const Preset p = parse_preset(a.preset);
  BundleOptions bo;
  bo.segment_seconds = a.segment_seconds;
  std::vector<std::vector<double>> rows(entries.size());
  std::vector<char> degenerate(entries.size(), 0);
  parallel_for(entries.size(), a.jobs, [&](std::size_t i) {
    if (entries[i]->audio.empty()) throw InputError("track '" + entries[i]->id + "' has no audio path");
    const PresetResult r = preset(segment_bundle_from_audio(read_wav(entries[i]->audio), bo), p);
    rows[i] = r.values;
    degenerate[i] = r.degenerate ? 1 : 0;
  });
  std::vector<std::string> schema;
  for (std::size_t k = 0; k < preset_dimension(p); ++k) schema.push_back(a.preset + "_" + std::to_string(k));
  const LabeledDataset d = build_dataset(entries, rows, schema);
  write_arff(a.out, d, a.preset);
  write_json(run_json_path(a.out, false), describe_run(sub));
  print_table({{"tracks", std::to_string(d.size())},
               {"dimensions", std::to_string(d.dims())},
               {"degenerate", std::to_string(std::count(degenerate.begin(), degenerate.end(), 1))},
               {"output", a.out}});
}

struct ConceptArgs {
  std::string manifest, vocab, out, preset = "max+mean";
  int jobs = 1;
};

void cmd_ingest_concepts(const ConceptArgs& a, const CLI::App& sub) {
  const Manifest m = read_manifest(a.manifest);
  const auto entries = sorted_entries(m);
  const std::vector<std::string> vocab = read_vocabulary(a.vocab);
  const ConceptPreset p = parse_concept_preset(a.preset);
  std::vector<std::vector<double>> rows(entries.size());
  parallel_for(entries.size(), a.jobs, [&](std::size_t i) {
    if (entries[i]->concepts.empty()) throw InputError("track '" + entries[i]->id + "' has no concepts path");
    rows[i] = aggregate_concepts(read_concept_scores(entries[i]->concepts, vocab), p);
  });
  std::vector<std::string> schema;
  const auto blocks = split_list(std::string(a.preset == "max+mean" ? "max,mean" : a.preset == "max+std" ? "max,std" : a.preset));
  for (const auto& b : blocks) {
    for (const auto& c : vocab) schema.push_back(b + "_" + c);
  }
  const LabeledDataset d = build_dataset(entries, rows, schema);
  write_arff(a.out, d, "concepts");
  write_json(run_json_path(a.out, false), describe_run(sub));
  print_table({{"tracks", std::to_string(d.size())}, {"dimensions", std::to_string(d.dims())}, {"output", a.out}});
}

/// Reorders `d` to follow `ids`.
LabeledDataset align_to(const LabeledDataset& d, const std::vector<std::string>& ids) {
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < d.ids.size(); ++i) pos[d.ids[i]] = i;
  std::vector<std::size_t> rows;
  for (const auto& id : ids) {
    const auto it = pos.find(id);
    if (it == pos.end()) throw InputError("sample '" + id + "' missing from one fusion input");
    rows.push_back(it->second);
  }
  LabeledDataset out = d.subset(rows);
  return out;
}

/// Re-expresses labels against a reference class list.
void remap_classes(LabeledDataset& d, const std::vector<std::string>& classes) {
  std::vector<int> map(d.class_names.size());
  for (std::size_t c = 0; c < d.class_names.size(); ++c) {
    const auto it = std::find(classes.begin(), classes.end(), d.class_names[c]);
    if (it == classes.end()) throw InputError("class '" + d.class_names[c] + "' missing from the reference input");
    map[c] = static_cast<int>(it - classes.begin());
  }
  for (int& l : d.labels) l = map[static_cast<std::size_t>(l)];
  d.class_names = classes;
}

struct FuseArgs {
  std::vector<std::string> inputs, prefixes;
  std::string out;
};

void cmd_fuse(const FuseArgs& a, const CLI::App& sub) {
  if (!a.prefixes.empty() && a.prefixes.size() != a.inputs.size()) throw InputError("give one --prefix per --in");
  std::vector<FusionPart> parts;
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    LabeledDataset d = read_arff(a.inputs[i]);
    if (!parts.empty()) {
      const auto& ref = parts.front().data;
      if (!ref.ids.empty() && !d.ids.empty()) d = align_to(d, ref.ids);
      remap_classes(d, ref.class_names);
    }
    parts.push_back({a.prefixes.empty() ? "m" + std::to_string(i) : a.prefixes[i], std::move(d)});
  }
  const LabeledDataset f = early_fuse(parts);
  write_arff(a.out, f, "fused");
  write_json(run_json_path(a.out, false), describe_run(sub));
  print_table({{"samples", std::to_string(f.size())}, {"dimensions", std::to_string(f.dims())}, {"output", a.out}});
}

struct ClfArgs {
  std::string clf = "svm", metric = "l2";
  int k = 1, epochs = 30;
  double c = 1.0;
};

ClassifierSpec make_spec(const ClfArgs& a, std::uint64_t seed) {
  ClassifierSpec s;
  s.kind = parse_classifier(a.clf);
  s.k = a.k;
  if (a.metric == "l1") {
    s.metric = Metric::L1;
  } else if (a.metric != "l2") {
    throw InputError("unknown metric '" + a.metric + "'");
  }
  s.c = a.c;
  s.epochs = a.epochs;
  s.seed = seed;
  return s;
}

void add_clf_options(CLI::App* sub, ClfArgs& a) {
  sub->add_option("--clf", a.clf, "Classifier: knn, nb, svm, majority")->capture_default_str();
  sub->add_option("--k", a.k, "Neighbours for knn")->capture_default_str();
  sub->add_option("--metric", a.metric, "knn distance: l1 or l2")->capture_default_str();
  sub->add_option("--c", a.c, "SVM complexity parameter")->capture_default_str();
  sub->add_option("--epochs", a.epochs, "SVM epochs")->capture_default_str();
}

struct CrossvalArgs {
  std::string arff, out = "crossval";
  ClfArgs clf;
  int folds = 10, repeats = 10;
  std::uint64_t seed = 0;
  bool separate_normalization = false;
};

void cmd_crossval(const CrossvalArgs& a, const CLI::App& sub) {
  const LabeledDataset d = read_arff(a.arff);
  const FoldAssignment folds = stratified_kfold(d.labels, a.folds, a.repeats, a.seed);
  for (const auto& w : folds.warnings) std::cerr << "warning: " << w << "\n";
  const CvResult r = cross_validate(d, make_spec(a.clf, a.seed), folds,
                                    a.separate_normalization ? Normalization::Separate : Normalization::TrainStatistics);
  const fs::path out(a.out);
  json per_class = json::array();
  Matrix table(d.class_names.size(), 3);
  for (std::size_t c = 0; c < d.class_names.size(); ++c) {
    per_class.push_back({{"class", d.class_names[c]},
                         {"precision", r.per_class[c].precision},
                         {"recall", r.per_class[c].recall},
                         {"f1", r.per_class[c].f1}});
    table(c, 0) = r.per_class[c].precision;
    table(c, 1) = r.per_class[c].recall;
    table(c, 2) = r.per_class[c].f1;
  }
  json metrics = {{"mean_accuracy", r.mean_accuracy},
                  {"std_accuracy", r.std_accuracy},
                  {"folds", r.folds},
                  {"repeats", r.repeats},
                  {"samples", d.size()},
                  {"dimensions", d.dims()},
                  {"seed", a.seed},
                  {"fold_accuracies", r.fold_accuracies},
                  {"per_class", per_class},
                  {"warnings", folds.warnings}};
  write_json(out / "metrics.json", metrics);
  write_file_bytes(out / "per_class.csv", encode_csv(table, std::vector<std::string>{"class", "precision", "recall", "f1"}, d.class_names));
  Matrix cm(r.confusion.rows(), r.confusion.cols());
  for (std::size_t i = 0; i < cm.size(); ++i) cm.values()[i] = static_cast<double>(r.confusion.values()[i]);
  std::vector<std::string> header{"true\\predicted"};
  header.insert(header.end(), d.class_names.begin(), d.class_names.end());
  write_file_bytes(out / "confusion.csv", encode_csv(cm, header, d.class_names));
  write_json(run_json_path(out, true), describe_run(sub));
  print_table({{"classifier", a.clf.clf},
               {"samples", std::to_string(d.size())},
               {"folds x repeats", std::to_string(r.folds) + " x " + std::to_string(r.repeats)},
               {"mean accuracy", fixed(r.mean_accuracy)},
               {"std accuracy", fixed(r.std_accuracy)}});
}

struct EnsembleArgs {
  std::vector<std::string> modalities;
  std::string train_ids, test_ids, out = "ensemble";
  ClfArgs clf;
  int members = 10;
  double holdout = 0.1;
  std::uint64_t seed = 0;
};

void cmd_ensemble(const EnsembleArgs& a, const CLI::App& sub) {
  const auto train_ids = read_id_list(a.train_ids), test_ids = read_id_list(a.test_ids);
  std::vector<LabeledDataset> data;
  for (const auto& p : a.modalities) {
    LabeledDataset d = read_arff(p);
    if (d.ids.empty()) throw InputError("'" + p + "' carries no sample ids");
    if (!data.empty()) remap_classes(d, data.front().class_names);
    data.push_back(std::move(d));
  }
  BaggingOptions bo;
  bo.members = a.members;
  bo.holdout_fraction = a.holdout;
  bo.seed = a.seed;
  std::vector<std::vector<EnsembleMember>> ensemble;
  std::vector<LabeledDataset> tests;
  for (std::size_t m = 0; m < data.size(); ++m) {
    bo.seed = derive_seed(a.seed, m);
    ensemble.push_back(bagging_train(align_to(data[m], train_ids), make_spec(a.clf, derive_seed(a.seed, 100 + m)), bo,
                                     fs::path(a.modalities[m]).stem().string()));
    tests.push_back(align_to(data[m], test_ids));
  }
  const int classes = data.front().class_count();
  const fs::path out(a.out);
  std::string csv = "id,true,predicted";
  for (const auto& c : data.front().class_names) csv += "," + csv_field("w_" + c);
  csv += "\n";
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_ids.size(); ++i) {
    std::vector<std::vector<double>> inputs;
    for (const auto& t : tests) {
      const auto row = t.features.row(i);
      inputs.emplace_back(row.begin(), row.end());
    }
    const VoteResult v = ensemble_predict(ensemble, inputs, classes);
    const int truth = tests.front().labels[i];
    correct += v.label == truth ? 1 : 0;
    csv += csv_field(test_ids[i]) + "," + csv_field(data.front().class_names[static_cast<std::size_t>(truth)]) + "," +
           csv_field(data.front().class_names[static_cast<std::size_t>(v.label)]);
    for (double s : v.sums) csv += "," + format_double(s);
    csv += "\n";
  }
  json members = json::array();
  for (const auto& mod : ensemble) {
    for (const auto& mem : mod) members.push_back({{"modality", mem.modality}, {"confidence", mem.confidence}});
  }
  const double acc = test_ids.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test_ids.size());
  write_file_bytes(out / "predictions.csv", csv);
  write_json(out / "metrics.json", {{"accuracy", acc}, {"test_samples", test_ids.size()}, {"seed", a.seed}, {"members", members}});
  write_json(run_json_path(out, true), describe_run(sub));
  print_table({{"modalities", std::to_string(data.size())},
               {"members per modality", std::to_string(a.members)},
               {"test samples", std::to_string(test_ids.size())},
               {"accuracy", fixed(acc)}});
}

struct FacesArgs {
  std::string gallery, probes, out = "faces.json";
  int grid = kLbpGrid;
};

std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw InputError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> v;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) v.push_back(e.path());
  }
  std::sort(v.begin(), v.end());
  return v;
}

void cmd_faces(const FacesArgs& a, const CLI::App& sub) {
  std::vector<LabeledFace> gallery;
  std::vector<fs::path> labels;
  for (const auto& e : fs::directory_iterator(a.gallery)) {
    if (e.is_directory()) labels.push_back(e.path());
  }
  std::sort(labels.begin(), labels.end());
  for (const auto& dir : labels) {
    for (const auto& f : sorted_files(dir, ".pgm")) gallery.push_back({dir.filename().string(), lbp_descriptor(read_pgm(f), a.grid)});
  }
  std::vector<std::pair<std::string, double>> preds;
  json probes = json::array();
  for (const auto& f : sorted_files(a.probes, ".pgm")) {
    const FaceMatch m = recognize_face(lbp_descriptor(read_pgm(f), a.grid), gallery);
    preds.emplace_back(m.label, m.confidence);
    probes.push_back({{"probe", f.filename().string()}, {"label", m.label}, {"distance", m.distance}, {"confidence", m.confidence}});
  }
  const ArtistScoreBoard board = artist_score(preds);
  json labels_json = json::object();
  for (const auto& [l, s] : board.labels) {
    labels_json[l] = {{"count", s.count}, {"mean_confidence", s.mean_confidence}, {"score", s.score}};
  }
  write_json(a.out, {{"winner", board.winner}, {"labels", labels_json}, {"probes", probes}});
  write_json(run_json_path(a.out, false), describe_run(sub));
  print_table({{"gallery faces", std::to_string(gallery.size())}, {"probes", std::to_string(preds.size())}, {"winner", board.winner}});
}

struct SalienceArgs {
  std::string arff, exclude, out = "salience.json";
  int top = 10;
};

void cmd_salience(const SalienceArgs& a, const CLI::App& sub) {
  const LabeledDataset d = read_arff(a.arff);
  std::set<std::string> excl;
  if (!a.exclude.empty()) {
    for (const auto& s : read_id_list(a.exclude)) excl.insert(s);
  }
  std::vector<ClassConceptProfile> profiles;
  for (int c = 0; c < d.class_count(); ++c) {
    ClassConceptProfile p{d.class_names[static_cast<std::size_t>(c)], d.schema, std::vector<double>(d.dims(), 0.0)};
    std::size_t n = 0;
    for (std::size_t r = 0; r < d.size(); ++r) {
      if (d.labels[r] != c) continue;
      ++n;
      for (std::size_t j = 0; j < d.dims(); ++j) p.frequency[j] += d.features(r, j);
    }
    if (n > 0) {
      for (double& v : p.frequency) v /= static_cast<double>(n);
    }
    profiles.push_back(std::move(p));
  }
  const auto lists = salient_concepts(profiles, excl);
  json out = json::object();
  std::vector<std::pair<std::string, std::string>> table;
  for (const auto& l : lists) {
    json arr = json::array();
    for (std::size_t i = 0; i < l.ranked.size() && static_cast<int>(i) < a.top; ++i) {
      arr.push_back({{"concept", l.ranked[i].concept_name}, {"score", l.ranked[i].score}});
    }
    out[l.label] = arr;
    table.emplace_back(l.label, l.ranked.empty() ? "-" : l.ranked.front().concept_name + " (" + fixed(l.ranked.front().score) + ")");
  }
  write_json(a.out, out);
  write_json(run_json_path(a.out, false), describe_run(sub));
  print_table(table);
}

struct BarArgs {
  std::string frames, out = "bar.ppm";
  int height = 0;
  double fps = 25.0;
};

void cmd_meancolorbar(const BarArgs& a, const CLI::App& sub) {
  auto src = open_frames(a.frames, a.fps);
  MeanColorBar bar;
  while (auto f = src->next()) bar.add(*f);
  const Frame img = bar.image(a.height > 0 ? std::optional<int>(a.height) : std::nullopt);
  write_ppm(a.out, img);
  write_json(run_json_path(a.out, false), describe_run(sub));
  print_table({{"frames", std::to_string(bar.width())}, {"bar", std::to_string(img.width()) + " x " + std::to_string(img.height())}});
}

struct CutArgs {
  std::string frames, out = "cuts.json", metric = "mean-rgb-l1";
  int window = 15;
  double kappa = 3.0, fps = 25.0;
};

void cmd_cutscan(const CutArgs& a, const CLI::App& sub) {
  auto src = open_frames(a.frames, a.fps);
  ActivityTracker t(parse_activity_metric(a.metric));
  std::size_t n = 0;
  while (auto f = src->next()) {
    t.add(*f);
    ++n;
  }
  if (n < 2) throw InputError("cut scan needs at least two frames");
  const auto cuts = naive_cut_detect(t.profile(), {a.window, a.kappa});
  write_json(a.out, {{"frames", n}, {"metric", a.metric}, {"boundaries", cuts}, {"profile", t.profile().distances}});
  write_json(run_json_path(a.out, false), describe_run(sub));
  print_table({{"frames", std::to_string(n)}, {"boundaries", std::to_string(cuts.size())}});
}

struct SplitArgs {
  std::string manifest, out = "splits", filter = "none";
  double fraction = 0.66;
  int count = 0;
  bool no_stratify = false;
  std::uint64_t seed = 0;
};

void cmd_splits(const SplitArgs& a, const CLI::App& sub) {
  const Manifest m = read_manifest(a.manifest, false);
  SplitSpec spec;
  spec.train_fraction = a.fraction;
  if (a.count > 0) spec.per_class_count = static_cast<std::size_t>(a.count);
  spec.filter = parse_split_filter(a.filter);
  spec.stratified = !a.no_stratify;
  spec.seed = a.seed;
  const Split s = make_splits(m, spec);
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << "\n";
  const fs::path out(a.out);
  write_file_bytes(out / "train.txt", encode_id_list(s.train));
  write_file_bytes(out / "test.txt", encode_id_list(s.test));
  write_json(run_json_path(out, true), describe_run(sub));
  print_table({{"train", std::to_string(s.train.size())}, {"test", std::to_string(s.test.size())}, {"filter", a.filter}});
}

struct ExportArgs {
  std::string in, out, ids, relation = "avmir";
};

/// CSV with header `id,label,<features...>` to a dataset.
LabeledDataset read_feature_csv(const fs::path& path) {
  std::istringstream in(read_file_bytes(path));
  std::string line;
  std::vector<std::string> header, ids, labels;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_list(line);
    if (header.empty()) {
      header = fields;
      if (header.size() < 3 || header[0] != "id" || header[1] != "label") throw InputError("CSV header must start with id,label");
      continue;
    }
    if (fields.size() != header.size()) throw InputError("CSV line " + std::to_string(line_no) + ": wrong field count");
    ids.push_back(fields[0]);
    labels.push_back(fields[1]);
    std::vector<double> row;
    for (std::size_t j = 2; j < fields.size(); ++j) {
      const auto v = parse_double(fields[j]);
      if (!v) throw InputError("CSV line " + std::to_string(line_no) + ": non-numeric value '" + fields[j] + "'");
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError("CSV '" + path.string() + "' has no rows");
  LabeledDataset d = LabeledDataset::from_string_labels(stack_rows(rows), labels, std::vector<std::string>(header.begin() + 2, header.end()));
  d.ids = ids;
  return d;
}

void cmd_arff_export(const ExportArgs& a, const CLI::App& sub) {
  LabeledDataset d = fs::path(a.in).extension() == ".arff" ? read_arff(a.in) : read_feature_csv(a.in);
  if (!a.ids.empty()) {
    if (d.ids.empty()) throw InputError("input carries no sample ids to filter on");
    d = align_to(d, read_id_list(a.ids));
  }
  write_arff(a.out, d, a.relation);
  write_json(run_json_path(a.out, false), describe_run(sub));
  print_table({{"samples", std::to_string(d.size())}, {"attributes", std::to_string(d.dims() + 1)}, {"output", a.out}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audio-visual music analysis toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "JSON config file (command-line flags take precedence)");
  app.config_formatter(std::make_shared<JsonConfig>(&app));
  app.allow_config_extras(CLI::config_extras_mode::error);

  AudioArgs audio;
  auto* s_audio = app.add_subcommand("extract-audio", "Rhythm-pattern family features per track");
  s_audio->add_option("--manifest", audio.manifest, "Dataset manifest (JSON)")->required();
  s_audio->add_option("--features", audio.features, "Comma list of rp,rh,ssd,mvd,tssd,trh")->capture_default_str();
  s_audio->add_option("--out", audio.out, "Output ARFF")->required();
  s_audio->add_option("--jobs", audio.jobs, "Worker threads")->capture_default_str();

  VisualArgs visual;
  auto* s_visual = app.add_subcommand("extract-visual", "Aggregated visual features per video");
  s_visual->add_option("--manifest", visual.manifest, "Dataset manifest (JSON)");
  s_visual->add_option("--frames", visual.frames, "Single video: PPM directory or raw frame stream");
  s_visual->add_option("--label", visual.label, "Class label for --frames")->capture_default_str();
  s_visual->add_option("--features", visual.features, "Comma list of gcs,gev,cf,cn,ic,waf,lfp")->capture_default_str();
  s_visual->add_option("--lfp-preset", visual.lfp_preset, "paper-80 (8 lightness bins x 10 bands), paper-60 (60 bands) or full")->capture_default_str();
  s_visual->add_option("--segmentation", visual.segmentation, "grid or quickshift")->capture_default_str();
  s_visual->add_option("--fps", visual.fps, "Frame rate for PPM directories")->capture_default_str();
  s_visual->add_option("--stride", visual.stride, "Use every n-th frame")->capture_default_str();
  s_visual->add_flag("--no-letterbox", visual.no_letterbox, "Keep letterbox bars");
  s_visual->add_option("--dump-frames", visual.dump_dir, "Directory for per-frame CSV dumps");
  s_visual->add_option("--out", visual.out, "Output ARFF")->required();
  s_visual->add_option("--jobs", visual.jobs, "Worker threads")->capture_default_str();

  AggregateArgs agg;
  auto* s_agg = app.add_subcommand("aggregate", "Segment-level presets EN0..EN5 / TEN per track");
  s_agg->add_option("--manifest", agg.manifest, "Dataset manifest (JSON)")->required();
  s_agg->add_option("--preset", agg.preset, "EN0..EN5 or TEN")->capture_default_str();
  s_agg->add_option("--segment-seconds", agg.segment_seconds, "Segment length")->capture_default_str();
  s_agg->add_option("--out", agg.out, "Output ARFF")->required();
  s_agg->add_option("--jobs", agg.jobs, "Worker threads")->capture_default_str();

  ConceptArgs concepts;
  auto* s_con = app.add_subcommand("ingest-concepts", "Aggregate per-frame concept scores per track");
  s_con->add_option("--manifest", concepts.manifest, "Dataset manifest (JSON)")->required();
  s_con->add_option("--vocab", concepts.vocab, "Vocabulary file, one concept per line")->required();
  s_con->add_option("--preset", concepts.preset, "mean, std, max, max+mean or max+std")->capture_default_str();
  s_con->add_option("--out", concepts.out, "Output ARFF")->required();
  s_con->add_option("--jobs", concepts.jobs, "Worker threads")->capture_default_str();

  FuseArgs fuse;
  auto* s_fuse = app.add_subcommand("fuse", "Early fusion of feature files");
  s_fuse->add_option("--in", fuse.inputs, "Input ARFF (repeat)")->required();
  s_fuse->add_option("--prefix", fuse.prefixes, "Schema prefix per input (repeat)");
  s_fuse->add_option("--out", fuse.out, "Output ARFF")->required();

  CrossvalArgs cv;
  auto* s_cv = app.add_subcommand("crossval", "Stratified repeated k-fold cross-validation");
  s_cv->add_option("--arff", cv.arff, "Input ARFF")->required();
  add_clf_options(s_cv, cv.clf);
  s_cv->add_option("--folds", cv.folds, "Folds")->capture_default_str();
  s_cv->add_option("--repeats", cv.repeats, "Repeats")->capture_default_str();
  s_cv->add_option("--seed", cv.seed, "Random seed")->capture_default_str();
  s_cv->add_flag("--paper-normalization", cv.separate_normalization, "Standardise train and test folds separately");
  s_cv->add_option("--out", cv.out, "Output directory")->capture_default_str();

  EnsembleArgs ens;
  auto* s_ens = app.add_subcommand("ensemble", "Bagged confidence-weighted multimodal ensemble");
  s_ens->add_option("--modality", ens.modalities, "Feature ARFF per modality (repeat)")->required();
  s_ens->add_option("--train-ids", ens.train_ids, "Training id list")->required();
  s_ens->add_option("--test-ids", ens.test_ids, "Test id list")->required();
  add_clf_options(s_ens, ens.clf);
  s_ens->add_option("--members", ens.members, "Members per modality")->capture_default_str();
  s_ens->add_option("--holdout", ens.holdout, "Held-out fraction per member")->capture_default_str();
  s_ens->add_option("--seed", ens.seed, "Random seed")->capture_default_str();
  s_ens->add_option("--out", ens.out, "Output directory")->capture_default_str();

  FacesArgs faces;
  auto* s_faces = app.add_subcommand("faces", "LBP face recognition with artist scoring");
  s_faces->add_option("--gallery", faces.gallery, "Directory of <label>/<n>.pgm")->required();
  s_faces->add_option("--probes", faces.probes, "Directory of probe .pgm faces")->required();
  s_faces->add_option("--grid", faces.grid, "LBP grid cells per side")->capture_default_str();
  s_faces->add_option("--out", faces.out, "Output JSON")->capture_default_str();

  SalienceArgs sal;
  auto* s_sal = app.add_subcommand("salience", "Salient concepts per class");
  s_sal->add_option("--arff", sal.arff, "Per-track mean concept frequencies (ARFF)")->required();
  s_sal->add_option("--exclude", sal.exclude, "Concept names to drop, one per line");
  s_sal->add_option("--top", sal.top, "Concepts listed per class")->capture_default_str();
  s_sal->add_option("--out", sal.out, "Output JSON")->capture_default_str();

  BarArgs bar;
  auto* s_bar = app.add_subcommand("meancolorbar", "Mean color bar image");
  s_bar->add_option("--frames", bar.frames, "PPM directory or raw frame stream")->required();
  s_bar->add_option("--height", bar.height, "Resample to this height (0 keeps frame height)")->capture_default_str();
  s_bar->add_option("--out", bar.out, "Output PPM")->capture_default_str();

  CutArgs cut;
  auto* s_cut = app.add_subcommand("cutscan", "Frame activity profile and naive cut detection");
  s_cut->add_option("--frames", cut.frames, "PPM directory or raw frame stream")->required();
  s_cut->add_option("--metric", cut.metric, "mean-rgb-l1 or histogram-chi2")->capture_default_str();
  s_cut->add_option("--window", cut.window, "Odd sliding window length")->capture_default_str();
  s_cut->add_option("--kappa", cut.kappa, "Median multiplier")->capture_default_str();
  s_cut->add_option("--out", cut.out, "Output JSON")->capture_default_str();

  SplitArgs split;
  auto* s_split = app.add_subcommand("splits", "Benchmark train/test id lists");
  s_split->add_option("--manifest", split.manifest, "Dataset manifest (JSON)")->required();
  s_split->add_option("--fraction", split.fraction, "Train fraction")->capture_default_str();
  s_split->add_option("--count", split.count, "Fixed train count per class (overrides --fraction)")->capture_default_str();
  s_split->add_option("--filter", split.filter, "none, artist, album or time")->capture_default_str();
  s_split->add_flag("--no-stratify", split.no_stratify, "Sample without class stratification");
  s_split->add_option("--seed", split.seed, "Random seed")->capture_default_str();
  s_split->add_option("--out", split.out, "Output directory")->capture_default_str();

  ExportArgs exp;
  auto* s_exp = app.add_subcommand("arff-export", "Convert a feature CSV or ARFF (optionally filtered by ids) to ARFF");
  s_exp->add_option("--in", exp.in, "Input CSV (id,label,features...) or ARFF")->required();
  s_exp->add_option("--ids", exp.ids, "Keep only these ids, in this order");
  s_exp->add_option("--relation", exp.relation, "Relation name")->capture_default_str();
  s_exp->add_option("--out", exp.out, "Output ARFF")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  try {
    if (s_audio->parsed()) cmd_extract_audio(audio, *s_audio);
    if (s_visual->parsed()) cmd_extract_visual(visual, *s_visual);
    if (s_agg->parsed()) cmd_aggregate(agg, *s_agg);
    if (s_con->parsed()) cmd_ingest_concepts(concepts, *s_con);
    if (s_fuse->parsed()) cmd_fuse(fuse, *s_fuse);
    if (s_cv->parsed()) cmd_crossval(cv, *s_cv);
    if (s_ens->parsed()) cmd_ensemble(ens, *s_ens);
    if (s_faces->parsed()) cmd_faces(faces, *s_faces);
    if (s_sal->parsed()) cmd_salience(sal, *s_sal);
    if (s_bar->parsed()) cmd_meancolorbar(bar, *s_bar);
    if (s_cut->parsed()) cmd_cutscan(cut, *s_cut);
    if (s_split->parsed()) cmd_splits(split, *s_split);
    if (s_exp->parsed()) cmd_arff_export(exp, *s_exp);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const InvariantError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
