#pragma once

// Full chain: sessions -> drift -> (fusion) -> segment -> features/windows ->
// split -> classify -> results table.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "arc/config.hpp"
#include "arc/corpus_io.hpp"

namespace arc {

struct VariantKey {
  Population population;
  Scenario scenario;
  Segmentation segmentation;
  friend auto operator<=>(const VariantKey&, const VariantKey&) = default;
};

inline std::string variant_name(const VariantKey& k) {
  return to_string(k.scenario) + "_" + to_string(k.population) + "_" + to_string(k.segmentation);
}

inline std::string cell_name(const CellKey& k) {
  return variant_name({k.population, k.scenario, k.segmentation}) + "_" + to_string(k.classifier);
}

struct CellRun {
  CellKey key;
  CellResult result;
};

struct PipelineResult {
  ResultsTable table;
  std::vector<CellRun> runs;
  std::vector<std::string> warnings;
  std::optional<GridResult<double>> window_search;
};

inline bool has_classifier(const PipelineConfig& cfg, Classifier c) {
  return std::find(cfg.eval.classifiers.begin(), cfg.eval.classifiers.end(), c) !=
         cfg.eval.classifiers.end();
}

inline bool runs_cnn(const PipelineConfig& cfg, Population p) {
  return has_classifier(cfg, Classifier::cnn) && (p == Population::healthy || cfg.eval.cnn_on_patients);
}

struct SyntheticJob {
  CorpusConfig corpus;
  CorpusEntry entry;

  Session generate() const { return synth_entry(corpus, entry).session; }
};

// Healthy subjects first, then `synth.patients` patient subjects whose
// affected wrist alternates left/right.
inline std::vector<SyntheticJob> synthetic_plan(const PipelineConfig& cfg) {
  std::vector<SyntheticJob> jobs;
  CorpusConfig healthy = cfg.synth;
  healthy.seed = sub_seed(cfg.seed, "synth");
  for (const auto& e : corpus_plan(healthy)) jobs.push_back({healthy, e});
  if (cfg.synth_patients == 0) return jobs;
  CorpusConfig patients = healthy;
  patients.n_subjects = cfg.synth_patients;
  patients.seed = sub_seed(cfg.seed, "synth/patients");
  patients.protocol.population = Population::patient;
  for (auto e : corpus_plan(patients)) {
    e.subject_id = "P" + e.subject_id.substr(1);
    e.session_id = "P" + e.session_id.substr(1);
    e.protocol.subject_id = e.subject_id;
    e.protocol.session_id = e.session_id;
    e.protocol.affected_wrist = e.subject_index % 2 == 0 ? Wrist::left : Wrist::right;
    jobs.push_back({patients, e});
  }
  return jobs;
}

inline SessionSource synthetic_source(const PipelineConfig& cfg) {
  return [jobs = synthetic_plan(cfg)](const SessionVisitor& visit) {
    for (const auto& j : jobs) visit(j.generate());
  };
}

// Picks window.window_s from eval.window_grid by SVM validation accuracy on
// the healthy L2 sessions.
inline GridResult<double> select_window(const SessionSource& source, const PipelineConfig& cfg) {
  return grid_search<double>(cfg.eval.window_grid, [&](double window_s) {
    DatasetConfig dc = cfg.dataset;
    dc.window.window_s = window_s;
    LabeledDataset ds{{}, Scenario::L2, Segmentation::action, Population::healthy, InputKind::features};
    source([&](const Session& s) {
      if (s.left.meta().population == Population::healthy) append_session(ds, s, dc);
    });
    SplitSpec spec = cfg.split;
    spec.seed = sub_seed(cfg.seed, "window_grid");
    SvmConfig svm = cfg.svm;
    svm.seed = sub_seed(cfg.seed, "window_grid/svm");
    return svm_validation_accuracy(split(ds, spec), svm);
  });
}

inline std::map<VariantKey, LabeledDataset> build_variants(const SessionSource& source,
                                                           const PipelineConfig& cfg) {
  std::map<VariantKey, LabeledDataset> out;
  source([&](const Session& s) {
    if (s.labels_left.empty() && s.labels_right.empty())
      fail(Errc::missing_labels, "session " + s.session_id + " has no labels");
    const auto& meta = s.left.meta();
    for (Segmentation seg : {Segmentation::action, Segmentation::spotting}) {
      const VariantKey k{meta.population, meta.scenario, seg};
      auto [it, fresh] = out.try_emplace(k);
      if (fresh) {
        it->second.scenario = k.scenario;
        it->second.segmentation = seg;
        it->second.population = k.population;
        it->second.kind = runs_cnn(cfg, k.population) ? InputKind::both : InputKind::features;
      }
      append_session(it->second, s, cfg.dataset);
    }
  });
  if (out.empty()) fail(Errc::insufficient_data, "no sessions");
  return out;
}

inline PipelineResult run_pipeline(const SessionSource& source, PipelineConfig cfg) {
  validate(cfg);
  PipelineResult result;
  if (!cfg.eval.window_grid.empty()) {
    result.window_search = select_window(source, cfg);
    cfg.dataset.window.window_s = result.window_search->best;
  }
  const auto variants = build_variants(source, cfg);

  std::map<VariantKey, SplitIndices> splits;
  for (const auto& [k, ds] : variants) {
    if (ds.empty()) {
      result.warnings.push_back(variant_name(k) + ": no labelled segments");
      continue;
    }
    SplitSpec spec = cfg.split;
    spec.seed = sub_seed(cfg.seed, "split/" + variant_name(k));
    splits[k] = split_indices(ds, spec);
    for (const auto& w : splits[k].warnings) result.warnings.push_back(variant_name(k) + ": " + w);
  }

  for (const auto& [k, idx] : splits) {
    const LabeledDataset& ds = variants.at(k);
    // Training data comes from the healthy variant when patients are
    // evaluated against a healthy-trained model.
    VariantKey train_key = k;
    if (k.population == Population::patient && cfg.eval.train_population == TrainPopulation::healthy)
      train_key.population = Population::healthy;
    if (!splits.count(train_key)) {
      result.warnings.push_back(variant_name(k) + ": no training variant " + variant_name(train_key));
      continue;
    }
    const LabeledDataset& train_ds = variants.at(train_key);
    const SplitIndices& train_idx = splits.at(train_key);
    const DatasetSplit data{train_ds.subset(train_idx.train), train_ds.subset(train_idx.val),
                            ds.subset(idx.test), {}};

    for (Classifier c : cfg.eval.classifiers) {
      if (c == Classifier::cnn && !runs_cnn(cfg, k.population)) continue;
      const CellKey key{k.scenario, k.population, k.segmentation, c};
      CellConfig cc;
      cc.svm = cfg.svm;
      cc.svm.seed = sub_seed(cfg.seed, "svm/" + cell_name(key));
      cc.cnn = cfg.cnn;
      cc.cnn.seed = sub_seed(cfg.seed, "cnn/" + cell_name(key));
      cc.cnn_train = cfg.cnn_train;
      CellRun run{key, run_cell(data, c, cc)};
      result.table.set(key, run.result);
      result.runs.push_back(std::move(run));
    }
  }
  return result;
}

}  // namespace arc
