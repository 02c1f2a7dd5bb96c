// arc: command-line driver for the activity recognition chain.
//
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numeric failure,
// 1 anything unexpected.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "arc/pipeline.hpp"

namespace {

using namespace arc;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string in;
};

PipelineConfig load_config(const Common& c) {
  PipelineConfig cfg;
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) fail(Errc::invalid_config, "cannot read config " + c.config);
    cfg = parse_config(in);
  }
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

fs::path out_dir(const Common& c, const PipelineConfig& cfg) {
  const std::string d = !c.out.empty() ? c.out : cfg.paths.out;
  if (d.empty()) fail(Errc::invalid_config, "no output directory (--out or paths.out)");
  std::error_code ec;
  fs::create_directories(d, ec);
  if (!fs::is_directory(d)) fail(Errc::io, "cannot create output directory " + d);
  return d;
}

fs::path in_dir(const Common& c, const PipelineConfig& cfg) {
  const std::string d = !c.in.empty() ? c.in : cfg.paths.data;
  if (d.empty()) fail(Errc::invalid_config, "no input directory (--in or paths.data)");
  return d;
}

void write_effective_config(const fs::path& dir, const PipelineConfig& cfg) {
  write_file(dir / "config.txt", [&](std::ostream& o) { write_config(o, cfg); });
}

// --- synth ----------------------------------------------------------------

int cmd_synth(const Common& c) {
  const auto cfg = load_config(c);
  const auto dir = out_dir(c, cfg);
  std::ostringstream manifest;
  manifest << "file,session_id,subject_id,scenario,population,seed\n";
  std::size_t n = 0;
  for (const auto& job : synthetic_plan(cfg)) {
    const Session s = job.generate();
    for (const auto& f : write_session(dir, s))
      manifest << f << ',' << s.session_id << ',' << job.entry.subject_id << ','
               << to_string(job.entry.scenario) << ',' << to_string(s.left.meta().population) << ','
               << job.entry.seed << '\n';
    ++n;
  }
  write_file(dir / "manifest.csv", [&](std::ostream& o) { o << manifest.str(); });
  write_effective_config(dir, cfg);
  std::cout << "wrote " << n << " sessions to " << dir.string() << '\n';
  return 0;
}

// --- ingest ---------------------------------------------------------------

int cmd_ingest(const Common& c) {
  const auto cfg = load_config(c);
  std::ostringstream summary;
  summary << "session_id,subject_id,scenario,population,samples,intervals_left,intervals_right\n";
  std::size_t n = 0;
  directory_source(in_dir(c, cfg))([&](const Session& s) {
    const auto& m = s.left.meta();
    summary << s.session_id << ',' << m.subject_id << ',' << to_string(m.scenario) << ','
            << to_string(m.population) << ',' << s.left.size() << ','
            << s.labels_left.intervals().size() << ',' << s.labels_right.intervals().size() << '\n';
    ++n;
  });
  if (!c.out.empty()) {
    const auto dir = out_dir(c, cfg);
    write_file(dir / "ingest.csv", [&](std::ostream& o) { o << summary.str(); });
  } else {
    std::cout << summary.str();
  }
  std::cerr << n << " sessions ok\n";
  return 0;
}

// --- preprocess -------------------------------------------------------------

int cmd_preprocess(const Common& c) {
  const auto cfg = load_config(c);
  const auto src = directory_source(in_dir(c, cfg));
  const auto dir = out_dir(c, cfg);
  std::size_t n = 0;
  src([&](const Session& s) {
    Session p = s;
    p.left = preprocess_recording(s.left, cfg.dataset);
    p.right = preprocess_recording(s.right, cfg.dataset);
    write_session(dir, p);
    ++n;
  });
  write_effective_config(dir, cfg);
  std::cout << "preprocessed " << n << " sessions\n";
  return 0;
}

// --- segment ----------------------------------------------------------------

int cmd_segment(const Common& c, Segmentation segmentation) {
  const auto cfg = load_config(c);
  const auto src = directory_source(in_dir(c, cfg));
  const auto dir = out_dir(c, cfg);
  std::size_t total = 0;
  src([&](const Session& s) {
    for (Wrist w : {Wrist::left, Wrist::right}) {
      const Recording rec = preprocess_recording(s.recording(w), cfg.dataset);
      auto segs = rec.meta().scenario == Scenario::L1 ? segment_by_rest(rec, cfg.dataset.rest)
                                                      : sliding_windows(rec, cfg.dataset.window);
      if (segmentation == Segmentation::spotting) {
        const auto peak = peak_channel_series(rec, cfg.dataset.spot);
        for (auto& sg : segs) sg = spot_gesture(rec, sg, cfg.dataset.spot, peak);
      }
      for (auto& sg : segs)
        sg.label = label_segment(s.labels(w), sg.start, sg.end, rec.meta().scenario,
                                 cfg.dataset.overlap_threshold);
      total += segs.size();
      write_file(dir / s.session_id / (wrist_stem(w) + ".segments.csv"),
                 [&](std::ostream& o) { write_segments(o, segs); });
    }
  });
  std::cout << total << " segments\n";
  return 0;
}

// --- features ---------------------------------------------------------------

int cmd_features(const Common& c, Segmentation segmentation) {
  const auto cfg = load_config(c);
  const auto src = directory_source(in_dir(c, cfg));
  const auto dir = out_dir(c, cfg);
  std::map<VariantKey, LabeledDataset> sets;
  src([&](const Session& s) {
    const auto& m = s.left.meta();
    const VariantKey k{m.population, m.scenario, segmentation};
    auto [it, fresh] = sets.try_emplace(k);
    if (fresh) it->second = {{}, k.scenario, segmentation, k.population, InputKind::features};
    append_session(it->second, s, cfg.dataset);
  });
  for (const auto& [k, ds] : sets) {
    const auto rows = feature_vectors(ds);
    write_file(dir / ("features_" + variant_name(k) + ".csv"),
               [&](std::ostream& o) { write_feature_matrix(o, cfg.dataset.channels, rows); });
    std::cout << variant_name(k) << ": " << rows.size() << " vectors\n";
  }
  return 0;
}

// --- train / eval -----------------------------------------------------------

struct CellSelect {
  std::string scenario = "L1";
  std::string population = "healthy";
  std::string segmentation = "action";
  std::string classifier = "svm";

  CellKey key() const {
    return {parse_scenario(scenario), parse_population(population), parse_segmentation(segmentation),
            parse_classifier(classifier)};
  }
};

struct PreparedCell {
  CellKey key;
  DatasetSplit data;
  CellConfig cc;
};

// Rebuilds the cell's dataset and split exactly as the pipeline does.
PreparedCell prepare_cell(const Common& c, const PipelineConfig& cfg, const CellSelect& sel) {
  PreparedCell p{sel.key(), {}, {}};
  const VariantKey vk{p.key.population, p.key.scenario, p.key.segmentation};
  LabeledDataset ds{{}, vk.scenario, vk.segmentation, vk.population,
                    p.key.classifier == Classifier::cnn ? InputKind::windows : InputKind::features};
  directory_source(in_dir(c, cfg))([&](const Session& s) {
    if (s.left.meta().population == vk.population) append_session(ds, s, cfg.dataset);
  });
  if (ds.empty()) fail(Errc::insufficient_data, "no labelled segments for " + variant_name(vk));
  SplitSpec spec = cfg.split;
  spec.seed = sub_seed(cfg.seed, "split/" + variant_name(vk));
  p.data = split(ds, spec);
  for (const auto& w : p.data.warnings) std::cerr << "warning: " << w << '\n';
  p.cc.svm = cfg.svm;
  p.cc.svm.seed = sub_seed(cfg.seed, "svm/" + cell_name(p.key));
  p.cc.cnn = cfg.cnn;
  p.cc.cnn.seed = sub_seed(cfg.seed, "cnn/" + cell_name(p.key));
  p.cc.cnn_train = cfg.cnn_train;
  return p;
}

void write_cell_outputs(const fs::path& dir, const CellKey& key, const CellResult& r) {
  ResultsTable t;
  t.set(key, r);
  write_file(dir / ("results_" + cell_name(key) + ".csv"), [&](std::ostream& o) { write_results_csv(o, t); });
  write_file(dir / ("confusion_" + cell_name(key) + ".csv"), [&](std::ostream& o) { r.confusion.write_csv(o); });
}

void write_model(const fs::path& dir, const CellKey& key, const CellResult& r) {
  if (const auto* svm = std::get_if<SvmModel>(&r.model)) {
    write_file(dir / ("model_" + cell_name(key) + ".svm"), [&](std::ostream& o) { write_svm(o, *svm); });
    write_file(dir / ("scaler_" + cell_name(key) + ".csv"),
               [&](std::ostream& o) { write_scaler(o, svm->scaler()); });
  } else if (const auto* cnn = std::get_if<CnnModel>(&r.model)) {
    write_file(dir / ("model_" + cell_name(key) + ".cnn"), [&](std::ostream& o) { write_cnn(o, *cnn); });
    write_file(dir / ("trainlog_" + cell_name(key) + ".csv"),
               [&](std::ostream& o) { write_training_log(o, r.training_log); });
  }
}

int cmd_train(const Common& c, const CellSelect& sel) {
  const auto cfg = load_config(c);
  const auto dir = out_dir(c, cfg);
  const auto p = prepare_cell(c, cfg, sel);
  const auto r = run_cell(p.data, p.key.classifier, p.cc);
  write_model(dir, p.key, r);
  write_cell_outputs(dir, p.key, r);
  std::cout << cell_name(p.key) << ": test accuracy " << format_percent(r.accuracy) << " (n=" << r.n_test
            << ")\n";
  return 0;
}

int cmd_eval(const Common& c, const CellSelect& sel, const std::string& model_path) {
  const auto cfg = load_config(c);
  const auto dir = out_dir(c, cfg);
  auto in = open_in(model_path);
  std::string head;
  std::getline(in, head);
  in.seekg(0);
  CellSelect s = sel;
  s.classifier = head.starts_with("arc_cnn") ? "cnn" : "svm";
  const auto p = prepare_cell(c, cfg, s);
  CellResult r;
  if (p.key.classifier == Classifier::svm) {
    const SvmModel m = parse_svm(in);
    r.confusion = evaluate(p.data.test, m.classes(), [&](const DatasetItem& it) { return m.predict(it.features).cls; });
  } else {
    const CnnModel m = parse_cnn(in);
    r.confusion = evaluate(p.data.test, m.classes, [&](const DatasetItem& it) { return predict_cnn(m, it.window); });
  }
  r.accuracy = r.confusion.accuracy();
  r.n_test = r.confusion.total();
  write_cell_outputs(dir, p.key, r);
  std::cout << cell_name(p.key) << ": test accuracy " << format_percent(r.accuracy) << " (n=" << r.n_test
            << ")\n";
  return 0;
}

// --- report -----------------------------------------------------------------

int cmd_report(const Common& c, const std::vector<std::string>& files) {
  ResultsTable t;
  for (const auto& f : files) {
    auto in = open_in(f);
    for (auto& [k, v] : parse_results_csv(in).cells) t.cells[k] = v;
  }
  if (t.cells.empty()) fail(Errc::insufficient_data, "no result rows");
  const auto rep = report(t);
  std::cout << rep.text;
  if (!c.out.empty()) {
    const fs::path dir = c.out;
    write_file(dir / "results.csv", [&](std::ostream& o) { o << rep.csv; });
    write_file(dir / "report.txt", [&](std::ostream& o) { o << rep.text; });
  }
  return 0;
}

// --- pipeline ---------------------------------------------------------------

int cmd_pipeline(const Common& c, bool synthetic) {
  const auto cfg = load_config(c);
  const auto dir = out_dir(c, cfg);
  const SessionSource src = synthetic ? synthetic_source(cfg) : directory_source(in_dir(c, cfg));
  const auto result = run_pipeline(src, cfg);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  if (result.window_search)
    std::cout << "selected window_s = " << text::fmt_exact(result.window_search->best) << '\n';
  for (const auto& run : result.runs) {
    write_model(dir, run.key, run.result);
    write_file(dir / ("confusion_" + cell_name(run.key) + ".csv"),
               [&](std::ostream& o) { run.result.confusion.write_csv(o); });
  }
  const auto rep = report(result.table);
  write_file(dir / "results.csv", [&](std::ostream& o) { o << rep.csv; });
  write_file(dir / "report.txt", [&](std::ostream& o) { o << rep.text; });
  write_effective_config(dir, cfg);
  std::cout << rep.text;
  return 0;
}

int exit_code(const Error& e) {
  switch (category(e.code())) {
    case ErrorCategory::config: return 2;
    case ErrorCategory::data: return 3;
    case ErrorCategory::numeric: return 4;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"arc: wrist IMU activity recognition chain"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub, bool needs_in) {
    sub->add_option("--config,-c", common.config, "pipeline config file (section.key = value)");
    sub->add_option("--seed", common.seed, "global seed (overrides the config)");
    sub->add_option("--out,-o", common.out, "output directory");
    if (needs_in) sub->add_option("--in,-i", common.in, "corpus or session directory");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  add_common(synth, false);
  auto* ingest = app.add_subcommand("ingest", "validate a corpus and summarise its sessions");
  add_common(ingest, true);
  auto* pre = app.add_subcommand("preprocess", "drift removal (and fusion) into a new corpus");
  add_common(pre, true);

  std::string segmentation = "action";
  auto* seg = app.add_subcommand("segment", "write segment CSVs per recording");
  add_common(seg, true);
  seg->add_option("--segmentation", segmentation, "action|spotting");
  auto* feat = app.add_subcommand("features", "write feature matrices per scenario/population");
  add_common(feat, true);
  feat->add_option("--segmentation", segmentation, "action|spotting");

  CellSelect cell;
  auto add_cell = [&](CLI::App* sub, bool with_classifier) {
    sub->add_option("--scenario", cell.scenario, "L1|L2");
    sub->add_option("--population", cell.population, "healthy|patient");
    sub->add_option("--segmentation", cell.segmentation, "action|spotting");
    if (with_classifier) sub->add_option("--classifier", cell.classifier, "svm|cnn");
  };
  auto* train = app.add_subcommand("train", "train one classifier cell and score its test split");
  add_common(train, true);
  add_cell(train, true);
  std::string model_path;
  auto* eval = app.add_subcommand("eval", "score a saved model on its cell's test split");
  add_common(eval, true);
  add_cell(eval, false);
  eval->add_option("--model,-m", model_path, "model file")->required();

  std::vector<std::string> result_files;
  auto* rep = app.add_subcommand("report", "merge result CSVs into the accuracy table");
  rep->add_option("results", result_files, "results CSV files")->required();
  rep->add_option("--out,-o", common.out, "directory for results.csv and report.txt");

  bool synthetic = false;
  auto* pipe = app.add_subcommand("pipeline", "run the whole chain and write the table");
  add_common(pipe, true);
  pipe->add_flag("--synthetic", synthetic, "generate the corpus in memory instead of reading --in");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*synth) return cmd_synth(common);
    if (*ingest) return cmd_ingest(common);
    if (*pre) return cmd_preprocess(common);
    if (*seg) return cmd_segment(common, parse_segmentation(segmentation));
    if (*feat) return cmd_features(common, parse_segmentation(segmentation));
    if (*train) return cmd_train(common, cell);
    if (*eval) return cmd_eval(common, cell, model_path);
    if (*rep) return cmd_report(common, result_files);
    if (*pipe) return cmd_pipeline(common, synthetic);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
