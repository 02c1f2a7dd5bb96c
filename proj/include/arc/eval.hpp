#pragma once

// Dataset assembly, reproducible splits, per-cell training/evaluation, grid
// search and the accuracy table.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "arc/cnn.hpp"
#include "arc/features.hpp"
#include "arc/preprocess.hpp"
#include "arc/segment.hpp"
#include "arc/svm.hpp"

namespace arc {

enum class Segmentation : std::uint8_t { action, spotting };
enum class Classifier : std::uint8_t { svm, cnn };
enum class InputKind : std::uint8_t { features, windows, both };

inline std::string to_string(Segmentation s) { return s == Segmentation::action ? "action" : "spotting"; }
inline std::string to_string(Classifier c) { return c == Classifier::svm ? "svm" : "cnn"; }

inline Segmentation parse_segmentation(std::string_view s, std::size_t line = 0) {
  s = text::trim(s);
  if (s == "action") return Segmentation::action;
  if (s == "spotting") return Segmentation::spotting;
  fail(Errc::invalid_config, "segmentation must be action|spotting", line);
}

inline Classifier parse_classifier(std::string_view s, std::size_t line = 0) {
  s = text::trim(s);
  if (s == "svm") return Classifier::svm;
  if (s == "cnn") return Classifier::cnn;
  fail(Errc::invalid_config, "classifier must be svm|cnn", line);
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct DatasetConfig {
  DriftConfig drift;
  bool fuse = false;  // raw IMU input: run attitude fusion after drift removal
  FusionConfig fusion;
  RestConfig rest;
  WindowConfig window;
  SpotConfig spot;
  ChannelSelection channels;
  double overlap_threshold = 0.5;
  // Fixed CNN input length for rest-bounded action segments.
  double cnn_action_window_s = 4.0;
};

struct Provenance {
  std::string subject_id;
  std::string session_id;
  Wrist wrist;
  std::size_t start;
  std::size_t end;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct DatasetItem {
  FeatureVector features;  // InputKind::features / both
  Matrix window;           // C x T, InputKind::windows / both
  MovementClass label;
  Provenance provenance;
};

struct LabeledDataset {
  std::vector<DatasetItem> items;
  Scenario scenario = Scenario::L1;
  Segmentation segmentation = Segmentation::action;
  Population population = Population::healthy;
  InputKind kind = InputKind::features;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }

  std::vector<MovementClass> classes() const {
    std::set<MovementClass> s;
    for (const auto& it : items) s.insert(it.label);
    return {s.begin(), s.end()};
  }

  LabeledDataset subset(std::span<const std::size_t> idx) const {
    LabeledDataset d{{}, scenario, segmentation, population, kind};
    d.items.reserve(idx.size());
    for (auto i : idx) d.items.push_back(items[i]);
    return d;
  }
};

// Class of a segment by maximum overlap with the label track: a target
// covering at least `threshold` of the segment keeps its class; otherwise
// Null in L2, discarded (nullopt) in L1.
inline std::optional<MovementClass> label_segment(const LabelTrack& track, std::size_t start,
                                                  std::size_t end, Scenario scenario,
                                                  double threshold) {
  const auto counts = track.overlap(start, end);
  MovementClass best = MovementClass::Null;
  std::size_t best_n = 0;
  for (const auto& [cls, n] : counts)
    if (n > best_n) {
      best = cls;
      best_n = n;
    }
  const double frac = static_cast<double>(best_n) / static_cast<double>(end - start);
  if (is_target(best) && frac >= threshold) return best;
  if (scenario == Scenario::L2) return MovementClass::Null;
  return std::nullopt;
}

// Fixed-length C x T window centred on the segment, shifted to stay inside
// the recording.
inline Matrix fixed_window(const Recording& rec, const Segment& seg, std::size_t length,
                           const ChannelSelection& sel) {
  if (length > rec.size()) fail(Errc::insufficient_data, "recording shorter than the cnn window");
  const std::size_t centre = (seg.start + seg.end) / 2;
  std::size_t first = centre > length / 2 ? centre - length / 2 : 0;
  first = std::min(first, rec.size() - length);
  Matrix w(sel.channels.size(), length);
  for (std::size_t t = 0; t < length; ++t)
    for (std::size_t k = 0; k < sel.channels.size(); ++k)
      w(k, t) = rec.samples()(first + t, sel.channels[k].index());
  return w;
}

inline Recording preprocess_recording(const Recording& rec, const DatasetConfig& cfg) {
  Recording out = remove_drift(rec, cfg.drift);
  if (cfg.fuse) out = fuse_attitude(out, cfg.fusion);
  return out;
}

// Length of CNN input windows for a dataset variant.
inline std::size_t cnn_window_length(Scenario sc, Segmentation seg, const DatasetConfig& cfg,
                                     double sample_rate) {
  if (seg == Segmentation::spotting)
    return seconds_to_samples(cfg.spot.margin_before_s, sample_rate) +
           seconds_to_samples(cfg.spot.margin_after_s, sample_rate) + 1;
  if (sc == Scenario::L2) return window_samples(cfg.window, sample_rate);
  return seconds_to_samples(cfg.cnn_action_window_s, sample_rate);
}

// Appends one session's labelled segments; sessions of another scenario are
// skipped.
inline void append_session(LabeledDataset& ds, const Session& session, const DatasetConfig& cfg) {
  for (Wrist w : {Wrist::left, Wrist::right}) {
    const Recording& raw = session.recording(w);
    if (raw.meta().scenario != ds.scenario) return;
    const LabelTrack& track = session.labels(w);
    const Recording rec = preprocess_recording(raw, cfg);
    std::vector<Segment> segs = ds.scenario == Scenario::L1 ? segment_by_rest(rec, cfg.rest)
                                                            : sliding_windows(rec, cfg.window);
    if (ds.segmentation == Segmentation::spotting) {
      const auto peak = peak_channel_series(rec, cfg.spot);
      for (auto& s : segs) s = spot_gesture(rec, s, cfg.spot, peak);
    }
    const std::size_t cnn_len =
        cnn_window_length(ds.scenario, ds.segmentation, cfg, rec.sample_rate());
    for (const auto& s : segs) {
      const auto label = label_segment(track, s.start, s.end, ds.scenario, cfg.overlap_threshold);
      if (!label) continue;
      DatasetItem item;
      item.label = *label;
      item.provenance = {raw.meta().subject_id, session.session_id, w, s.start, s.end};
      if (ds.kind != InputKind::windows) {
        item.features = extract_features(cfg.channels.select(slice(rec, s)));
        item.features.label = *label;
      }
      if (ds.kind != InputKind::features) item.window = fixed_window(rec, s, cnn_len, cfg.channels);
      ds.items.push_back(std::move(item));
    }
  }
}

inline LabeledDataset build_dataset(std::span<const Session> sessions, Scenario scenario,
                                    Segmentation segmentation, const DatasetConfig& cfg,
                                    InputKind kind = InputKind::features) {
  LabeledDataset ds{{}, scenario, segmentation, Population::healthy, kind};
  std::size_t used = 0;
  for (const auto& s : sessions) {
    if (s.left.meta().scenario != scenario) continue;
    if (s.labels_left.empty() && s.labels_right.empty())
      fail(Errc::missing_labels, "session " + s.session_id + " has no labels");
    if (used == 0) ds.population = s.left.meta().population;
    else if (s.left.meta().population != ds.population)
      fail(Errc::metadata_mismatch, "mixed populations in one dataset");
    append_session(ds, s, cfg);
    ++used;
  }
  if (used == 0) fail(Errc::insufficient_data, "no " + to_string(scenario) + " sessions");
  return ds;
}

inline std::vector<FeatureVector> feature_vectors(const LabeledDataset& ds) {
  std::vector<FeatureVector> out;
  out.reserve(ds.size());
  for (const auto& it : ds.items) out.push_back(it.features);
  return out;
}

inline std::vector<LabeledWindow> labeled_windows(const LabeledDataset& ds) {
  std::vector<LabeledWindow> out;
  out.reserve(ds.size());
  for (const auto& it : ds.items) out.push_back({it.window, it.label});
  return out;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

enum class SplitUnit : std::uint8_t { segment, session };

struct SplitSpec {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
  std::uint64_t seed = 0;
  SplitUnit unit = SplitUnit::segment;
};

inline void validate(const SplitSpec& s) {
  require_config(s.train >= 0 && s.val >= 0 && s.test > 0, "split ratios must be >= 0, test > 0");
  require_config(std::abs(s.train + s.val + s.test - 1.0) < 1e-9, "split ratios must sum to 1");
}

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::size_t share(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
}

// Shuffled group of n members -> (train, val, test) by ratio, remainder to
// train. Groups smaller than the number of non-empty parts put one member in
// test (when there are at least two) and the rest in train.
inline void allocate(std::vector<std::size_t> members, const SplitSpec& spec, Rng& rng,
                     SplitIndices& out, const std::string& what) {
  shuffle(members, rng);
  const std::size_t n = members.size();
  const std::size_t parts = (spec.train > 0) + (spec.val > 0) + (spec.test > 0);
  std::size_t n_val = share(spec.val, n), n_test = share(spec.test, n);
  if (n < parts) {
    out.warnings.push_back(what + " has " + std::to_string(n) + " items for " +
                           std::to_string(parts) + " split parts");
    n_val = 0;
    n_test = n >= 2 ? 1 : 0;
  }
  const std::size_t n_train = n - n_val - n_test;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train) out.train.push_back(members[i]);
    else if (i < n_train + n_val) out.val.push_back(members[i]);
    else out.test.push_back(members[i]);
  }
}

}  // namespace detail

inline SplitIndices split_indices(const LabeledDataset& ds, const SplitSpec& spec) {
  validate(spec);
  if (ds.empty()) fail(Errc::insufficient_data, "cannot split an empty dataset");
  Rng rng(spec.seed);
  SplitIndices out;
  if (spec.unit == SplitUnit::segment) {
    std::map<MovementClass, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.items[i].label].push_back(i);
    for (auto& [cls, members] : by_class) detail::allocate(members, spec, rng, out, "class " + to_string(cls));
  } else {
    std::map<std::string, std::vector<std::size_t>> by_session;
    for (std::size_t i = 0; i < ds.size(); ++i) by_session[ds.items[i].provenance.session_id].push_back(i);
    std::vector<std::size_t> session_ids(by_session.size());
    std::vector<const std::vector<std::size_t>*> groups;
    for (const auto& [_, members] : by_session) groups.push_back(&members);
    for (std::size_t i = 0; i < groups.size(); ++i) session_ids[i] = i;
    SplitIndices by_group;
    detail::allocate(session_ids, spec, rng, by_group, "session list");
    out.warnings = by_group.warnings;
    for (auto g : by_group.train) out.train.insert(out.train.end(), groups[g]->begin(), groups[g]->end());
    for (auto g : by_group.val) out.val.insert(out.val.end(), groups[g]->begin(), groups[g]->end());
    for (auto g : by_group.test) out.test.insert(out.test.end(), groups[g]->begin(), groups[g]->end());
  }
  for (auto* v : {&out.train, &out.val, &out.test}) std::sort(v->begin(), v->end());
  if (out.test.empty()) fail(Errc::insufficient_data, "split leaves an empty test set");
  return out;
}

struct DatasetSplit {
  LabeledDataset train, val, test;
  std::vector<std::string> warnings;
};

inline DatasetSplit split(const LabeledDataset& ds, const SplitSpec& spec) {
  const auto idx = split_indices(ds, spec);
  return {ds.subset(idx.train), ds.subset(idx.val), ds.subset(idx.test), idx.warnings};
}

// ---------------------------------------------------------------------------
// Confusion matrix and cells
// ---------------------------------------------------------------------------

class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<MovementClass> classes)
      : classes_(std::move(classes)), counts_(classes_.size() * classes_.size(), 0) {}

  void add(MovementClass truth, MovementClass predicted) {
    counts_[pos(truth) * classes_.size() + pos(predicted)] += 1;
  }

  const std::vector<MovementClass>& classes() const noexcept { return classes_; }
  std::size_t at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * classes_.size() + predicted];
  }
  std::size_t total() const {
    std::size_t s = 0;
    for (auto c : counts_) s += c;
    return s;
  }
  std::size_t trace() const {
    std::size_t s = 0;
    for (std::size_t i = 0; i < classes_.size(); ++i) s += at(i, i);
    return s;
  }
  std::size_t row_sum(std::size_t truth) const {
    std::size_t s = 0;
    for (std::size_t j = 0; j < classes_.size(); ++j) s += at(truth, j);
    return s;
  }
  double accuracy() const {
    const auto t = total();
    return t == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(t);
  }

  void write_csv(std::ostream& out) const {
    out << "true\\pred";
    for (auto c : classes_) out << ',' << to_string(c);
    out << '\n';
    for (std::size_t i = 0; i < classes_.size(); ++i) {
      out << to_string(classes_[i]);
      for (std::size_t j = 0; j < classes_.size(); ++j) out << ',' << at(i, j);
      out << '\n';
    }
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t pos(MovementClass c) const {
    const auto it = std::find(classes_.begin(), classes_.end(), c);
    if (it == classes_.end()) fail(Errc::out_of_range, "class " + to_string(c) + " not in matrix");
    return static_cast<std::size_t>(it - classes_.begin());
  }

  std::vector<MovementClass> classes_;
  std::vector<std::size_t> counts_;
};

// Accuracy and confusion of any predictor over a test set.
template <class Predict>
ConfusionMatrix evaluate(const LabeledDataset& test, std::vector<MovementClass> classes, Predict&& predict) {
  std::set<MovementClass> all(classes.begin(), classes.end());
  for (const auto& it : test.items) all.insert(it.label);
  ConfusionMatrix cm({all.begin(), all.end()});
  for (const auto& it : test.items) cm.add(it.label, predict(it));
  return cm;
}

struct CellConfig {
  SvmConfig svm;
  CnnConfig cnn;  // channels/time_points/classes are filled from the data
  CnnTrainOptions cnn_train;
};

struct CellResult {
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  std::size_t n_test = 0;
  std::variant<std::monostate, SvmModel, CnnModel> model;
  std::vector<EpochLog> training_log;
};

inline CnnConfig cnn_config_for(const LabeledDataset& train, CnnConfig base, std::size_t n_classes) {
  base.channels = train.items.front().window.rows();
  base.time_points = train.items.front().window.cols();
  base.classes = n_classes;
  return base;
}

// SVM: trains on train + val. CNN: trains on train, selects on val.
inline CellResult run_cell(const DatasetSplit& data, Classifier classifier, const CellConfig& cfg) {
  if (data.train.empty()) fail(Errc::insufficient_data, "empty training split");
  CellResult r;
  if (classifier == Classifier::svm) {
    auto train = feature_vectors(data.train);
    const auto val = feature_vectors(data.val);
    train.insert(train.end(), val.begin(), val.end());
    SvmModel model = fit_svm(train, cfg.svm);
    r.confusion = evaluate(data.test, model.classes(),
                           [&](const DatasetItem& it) { return model.predict(it.features).cls; });
    r.model = std::move(model);
  } else {
    if (data.val.empty()) fail(Errc::insufficient_data, "cnn needs a validation split");
    std::set<MovementClass> cls;
    for (const auto* part : {&data.train, &data.val})
      for (const auto& it : part->items) cls.insert(it.label);
    std::vector<MovementClass> classes(cls.begin(), cls.end());
    const auto train = labeled_windows(data.train);
    const auto val = labeled_windows(data.val);
    const CnnConfig ccfg = cnn_config_for(data.train, cfg.cnn, classes.size());
    CnnModel model = train_cnn(train, val, ccfg, cfg.cnn_train, classes, &r.training_log);
    r.confusion = evaluate(data.test, model.classes,
                           [&](const DatasetItem& it) { return predict_cnn(model, it.window); });
    r.model = std::move(model);
  }
  r.accuracy = r.confusion.accuracy();
  r.n_test = r.confusion.total();
  return r;
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

template <class Config>
struct GridResult {
  std::size_t best_index = 0;
  Config best;
  std::vector<double> scores;
};

// Exhaustive search maximising `score`; ties keep the earliest grid entry.
template <class Config, class Score>
GridResult<Config> grid_search(std::span<const Config> grid, Score&& score) {
  if (grid.empty()) fail(Errc::invalid_config, "empty grid");
  GridResult<Config> r{0, grid.front(), {}};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    r.scores.push_back(score(grid[i]));
    if (r.scores[i] > r.scores[r.best_index]) r.best_index = i;
  }
  r.best = grid[r.best_index];
  return r;
}

// SVM validation accuracy for a fixed dataset split.
inline double svm_validation_accuracy(const DatasetSplit& data, const SvmConfig& cfg) {
  if (data.val.empty()) fail(Errc::insufficient_data, "grid search needs a validation split");
  const SvmModel model = fit_svm(feature_vectors(data.train), cfg);
  return evaluate(data.val, model.classes(),
                  [&](const DatasetItem& it) { return model.predict(it.features).cls; })
      .accuracy();
}

// Picks the sliding-window length (L2) by SVM validation accuracy. The test
// part of each split is never scored.
inline GridResult<double> search_window_size(std::span<const Session> sessions,
                                             std::span<const double> window_grid,
                                             const DatasetConfig& base, const SplitSpec& spec,
                                             const SvmConfig& svm) {
  return grid_search<double>(window_grid, [&](double window_s) {
    DatasetConfig cfg = base;
    cfg.window.window_s = window_s;
    const auto ds = build_dataset(sessions, Scenario::L2, Segmentation::action, cfg);
    return svm_validation_accuracy(split(ds, spec), svm);
  });
}

// ---------------------------------------------------------------------------
// Results table
// ---------------------------------------------------------------------------

struct CellKey {
  Scenario scenario;
  Population population;
  Segmentation segmentation;
  Classifier classifier;
  friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

struct CellSummary {
  double accuracy = 0.0;
  std::size_t n_test = 0;
  ConfusionMatrix confusion;
};

struct ResultsTable {
  std::map<CellKey, CellSummary> cells;

  void set(const CellKey& k, const CellResult& r) { cells[k] = {r.accuracy, r.n_test, r.confusion}; }
};

inline void write_results_csv(std::ostream& out, const ResultsTable& t) {
  out << "scenario,population,segmentation,classifier,accuracy,n_test\n";
  for (const auto& [k, c] : t.cells)
    out << to_string(k.scenario) << ',' << to_string(k.population) << ','
        << to_string(k.segmentation) << ',' << to_string(k.classifier) << ','
        << text::fmt_exact(c.accuracy) << ',' << c.n_test << '\n';
}

inline ResultsTable parse_results_csv(std::istream& in) {
  ResultsTable t;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto s = text::trim(raw);
    if (s.empty() || s.starts_with("scenario,")) continue;
    const auto c = text::split(s, ',');
    if (c.size() != 6) fail(Errc::malformed_row, "results row", line);
    CellKey k{parse_scenario(c[0], line), parse_population(c[1], line),
              parse_segmentation(c[2], line), parse_classifier(c[3], line)};
    const double acc = text::to_double(c[4], line);
    if (!(acc >= 0.0 && acc <= 1.0)) fail(Errc::malformed_row, "accuracy outside [0,1]", line);
    t.cells[k] = {acc, static_cast<std::size_t>(text::to_int(c[5], line)), {}};
  }
  return t;
}

inline std::string format_percent(double accuracy) {
  return std::to_string(static_cast<long>(std::lround(accuracy * 100.0))) + "%";
}

namespace detail {

inline std::size_t display_width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char c : s) w += (c & 0xC0) != 0x80;
  return w;
}

inline std::string pad(const std::string& s, std::size_t width) {
  return s + std::string(width - std::min(width, display_width(s)), ' ');
}

}  // namespace detail

// Text table with one row per scenario and the six columns of the published
// layout (healthy: action/spotting x SVM/CNN; patients: action/spotting SVM),
// plus any further populated columns. Empty cells render as an em dash.
inline std::string render_table(const ResultsTable& t) {
  using P = Population;
  using S = Segmentation;
  using C = Classifier;
  std::vector<std::tuple<P, S, C>> columns = {
      {P::healthy, S::action, C::svm},   {P::healthy, S::action, C::cnn},
      {P::healthy, S::spotting, C::svm}, {P::healthy, S::spotting, C::cnn},
      {P::patient, S::action, C::svm},   {P::patient, S::spotting, C::svm}};
  for (const auto& [k, _] : t.cells) {
    const std::tuple<P, S, C> col{k.population, k.segmentation, k.classifier};
    if (std::find(columns.begin(), columns.end(), col) == columns.end()) columns.push_back(col);
  }
  auto header = [](const std::tuple<P, S, C>& c) {
    return std::string(std::get<0>(c) == P::healthy ? "Healthy" : "Patients") + " " +
           (std::get<1>(c) == S::action ? "Action" : "Spotting") + " " +
           (std::get<2>(c) == C::svm ? "SVM" : "CNN");
  };
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"Scenario"});
  for (const auto& c : columns) rows[0].push_back(header(c));
  for (Scenario sc : {Scenario::L1, Scenario::L2}) {
    std::vector<std::string> r{to_string(sc)};
    for (const auto& [p, s, c] : columns) {
      const auto it = t.cells.find(CellKey{sc, p, s, c});
      r.push_back(it == t.cells.end() ? "—" : format_percent(it->second.accuracy));
    }
    rows.push_back(std::move(r));
  }
  std::vector<std::size_t> widths(rows[0].size(), 0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) widths[i] = std::max(widths[i], detail::display_width(r[i]));
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& r) {
    out << '|';
    for (std::size_t i = 0; i < r.size(); ++i) out << ' ' << detail::pad(r[i], widths[i]) << " |";
    out << '\n';
  };
  emit(rows[0]);
  out << '|';
  for (auto w : widths) out << std::string(w + 2, '-') << '|';
  out << '\n';
  for (std::size_t i = 1; i < rows.size(); ++i) emit(rows[i]);
  return out.str();
}

struct Report {
  std::string text;
  std::string csv;
};

inline Report report(const ResultsTable& t) {
  std::ostringstream csv;
  write_results_csv(csv, t);
  return {render_table(t), csv.str()};
}

}  // namespace arc
