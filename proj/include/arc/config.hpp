#pragma once

// Pipeline configuration file: `section.key = value` lines, `#` comments.
// Unknown keys and unparsable values are rejected with their line number.

#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "arc/eval.hpp"
#include "arc/synth.hpp"

namespace arc {

enum class TrainPopulation : std::uint8_t { same, healthy };

struct EvalOptions {
  std::vector<Classifier> classifiers{Classifier::svm, Classifier::cnn};
  bool cnn_on_patients = false;
  TrainPopulation train_population = TrainPopulation::same;
  std::vector<double> window_grid{2.0, 3.0, 4.0, 5.0};  // empty: keep window.window_s
};

struct PathOptions {
  std::string data;
  std::string out;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  DatasetConfig dataset;
  SvmConfig svm;
  CnnConfig cnn;
  CnnTrainOptions cnn_train;
  SplitSpec split;
  CorpusConfig synth;
  std::size_t synth_patients = 0;
  EvalOptions eval;
  PathOptions paths;

  PipelineConfig() {
    cnn_train.epochs = 40;
    cnn_train.patience = 10;
  }
};

namespace config_detail {

using Setter = std::function<void(PipelineConfig&, std::string_view, std::size_t)>;
using Getter = std::function<std::string(const PipelineConfig&)>;

struct Entry {
  std::string key;
  Setter set;
  Getter get;
};

inline double as_double(std::string_view v, std::size_t line) {
  return text::to_double(v, line, Errc::invalid_config);
}

inline std::size_t as_count(std::string_view v, std::size_t line) {
  const auto n = text::to_int(v, line, Errc::invalid_config);
  if (n < 0) fail(Errc::invalid_config, "expected a non-negative integer", line);
  return static_cast<std::size_t>(n);
}

inline bool as_bool(std::string_view v, std::size_t line) {
  v = text::trim(v);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(Errc::invalid_config, "expected true|false", line);
}

inline std::uint64_t as_seed(std::string_view v, std::size_t line) {
  v = text::trim(v);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) fail(Errc::invalid_config, "bad seed", line);
  return out;
}

inline std::vector<ChannelId> as_channels(std::string_view v, std::size_t line) {
  v = text::trim(v);
  if (v == "all") return all_channels();
  if (v == "svm9") return ChannelSelection::svm_nine().channels;
  if (v == "acc") return sensor_channels(Sensor::acceleration);
  std::vector<ChannelId> out;
  for (auto part : text::split(v, ',')) {
    const auto c = try_parse_channel(text::trim(part));
    if (!c) fail(Errc::invalid_config, "unknown channel '" + std::string(part) + "'", line);
    out.push_back(*c);
  }
  if (out.empty()) fail(Errc::invalid_config, "empty channel list", line);
  return out;
}

inline std::string channels_string(const std::vector<ChannelId>& cs) {
  if (cs == all_channels()) return "all";
  if (cs == ChannelSelection::svm_nine().channels) return "svm9";
  if (cs == sensor_channels(Sensor::acceleration)) return "acc";
  std::string s;
  for (auto c : cs) s += (s.empty() ? "" : ",") + std::string(channel_name(c));
  return s;
}

inline std::string num(double v) { return text::fmt_exact(v); }
inline std::string num(std::size_t v) { return std::to_string(v); }
inline std::string boolean(bool b) { return b ? "true" : "false"; }

#define ARC_DOUBLE(name, field)                                                             \
  Entry {                                                                                   \
    name, [](PipelineConfig& c, std::string_view v, std::size_t l) { c.field = as_double(v, l); }, \
        [](const PipelineConfig& c) { return num(c.field); }                                \
  }
#define ARC_COUNT(name, field)                                                              \
  Entry {                                                                                   \
    name, [](PipelineConfig& c, std::string_view v, std::size_t l) { c.field = as_count(v, l); }, \
        [](const PipelineConfig& c) { return num(c.field); }                                \
  }
#define ARC_BOOL(name, field)                                                               \
  Entry {                                                                                   \
    name, [](PipelineConfig& c, std::string_view v, std::size_t l) { c.field = as_bool(v, l); }, \
        [](const PipelineConfig& c) { return boolean(c.field); }                            \
  }

inline const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {"seed", [](PipelineConfig& c, std::string_view v, std::size_t l) { c.seed = as_seed(v, l); },
       [](const PipelineConfig& c) { return std::to_string(c.seed); }},
      {"paths.data", [](PipelineConfig& c, std::string_view v, std::size_t) { c.paths.data = std::string(text::trim(v)); },
       [](const PipelineConfig& c) { return c.paths.data; }},
      {"paths.out", [](PipelineConfig& c, std::string_view v, std::size_t) { c.paths.out = std::string(text::trim(v)); },
       [](const PipelineConfig& c) { return c.paths.out; }},

      ARC_DOUBLE("drift.window_s", dataset.drift.highpass_window_s),
      {"drift.channels",
       [](PipelineConfig& c, std::string_view v, std::size_t l) { c.dataset.drift.channels = as_channels(v, l); },
       [](const PipelineConfig& c) { return channels_string(c.dataset.drift.channels); }},

      ARC_BOOL("fusion.enabled", dataset.fuse),
      ARC_DOUBLE("fusion.gain", dataset.fusion.correction_gain),
      ARC_DOUBLE("fusion.gravity", dataset.fusion.gravity_magnitude),
      ARC_BOOL("fusion.use_magnetometer", dataset.fusion.use_magnetometer),

      ARC_DOUBLE("rest.energy_window_s", dataset.rest.energy_window_s),
      ARC_DOUBLE("rest.energy_threshold", dataset.rest.energy_threshold),
      ARC_DOUBLE("rest.min_rest_s", dataset.rest.min_rest_s),
      ARC_DOUBLE("rest.min_action_s", dataset.rest.min_action_s),

      ARC_DOUBLE("window.window_s", dataset.window.window_s),

      ARC_DOUBLE("spot.margin_before_s", dataset.spot.margin_before_s),
      ARC_DOUBLE("spot.margin_after_s", dataset.spot.margin_after_s),
      {"spot.peak_channel",
       [](PipelineConfig& c, std::string_view v, std::size_t l) {
         v = text::trim(v);
         if (v == "norm") {
           c.dataset.spot.peak_channel.reset();
           return;
         }
         const auto ch = try_parse_channel(v);
         if (!ch) fail(Errc::invalid_config, "unknown channel '" + std::string(v) + "'", l);
         c.dataset.spot.peak_channel = *ch;
       },
       [](const PipelineConfig& c) {
         return c.dataset.spot.peak_channel ? std::string(channel_name(*c.dataset.spot.peak_channel))
                                            : std::string("norm");
       }},

      {"features.channels",
       [](PipelineConfig& c, std::string_view v, std::size_t l) { c.dataset.channels.channels = as_channels(v, l); },
       [](const PipelineConfig& c) { return channels_string(c.dataset.channels.channels); }},
      ARC_DOUBLE("dataset.overlap_threshold", dataset.overlap_threshold),
      ARC_DOUBLE("dataset.cnn_action_window_s", dataset.cnn_action_window_s),

      ARC_DOUBLE("svm.c", svm.c),
      ARC_DOUBLE("svm.tolerance", svm.tolerance),
      ARC_COUNT("svm.max_epochs", svm.max_epochs),

      ARC_COUNT("cnn.f1", cnn.f1),
      ARC_COUNT("cnn.depth", cnn.depth),
      ARC_COUNT("cnn.f2", cnn.f2),
      ARC_COUNT("cnn.separable_kernel", cnn.separable_kernel),
      ARC_COUNT("cnn.pool1", cnn.pool1),
      ARC_COUNT("cnn.pool2", cnn.pool2),
      ARC_DOUBLE("cnn.dropout", cnn.dropout),
      ARC_DOUBLE("cnn.learning_rate", cnn_train.learning_rate),
      ARC_COUNT("cnn.batch_size", cnn_train.batch_size),
      ARC_COUNT("cnn.epochs", cnn_train.epochs),
      ARC_COUNT("cnn.patience", cnn_train.patience),

      ARC_DOUBLE("split.train", split.train),
      ARC_DOUBLE("split.val", split.val),
      ARC_DOUBLE("split.test", split.test),
      {"split.unit",
       [](PipelineConfig& c, std::string_view v, std::size_t l) {
         v = text::trim(v);
         if (v == "segment") c.split.unit = SplitUnit::segment;
         else if (v == "session") c.split.unit = SplitUnit::session;
         else fail(Errc::invalid_config, "split.unit must be segment|session", l);
       },
       [](const PipelineConfig& c) {
         return std::string(c.split.unit == SplitUnit::segment ? "segment" : "session");
       }},

      ARC_COUNT("synth.n_subjects", synth.n_subjects),
      ARC_COUNT("synth.patients", synth_patients),
      ARC_COUNT("synth.l1_repetitions", synth.l1_repetitions),
      ARC_COUNT("synth.l2_sessions", synth.l2_sessions),
      ARC_COUNT("synth.l2_targets", synth.l2_targets),
      ARC_COUNT("synth.l2_nontargets", synth.l2_nontargets),
      ARC_DOUBLE("synth.subject_jitter", synth.subject_jitter),
      ARC_DOUBLE("synth.rest_s", synth.protocol.rest_s),
      ARC_DOUBLE("synth.noise_std", synth.protocol.noise_std),
      ARC_DOUBLE("synth.drift_rate", synth.protocol.drift_rate),
      ARC_DOUBLE("synth.instance_jitter", synth.protocol.instance_jitter),
      ARC_DOUBLE("synth.affected_scale", synth.protocol.affected_scale),
      ARC_DOUBLE("synth.sample_rate", synth.protocol.sample_rate),

      {"eval.classifiers",
       [](PipelineConfig& c, std::string_view v, std::size_t l) {
         c.eval.classifiers.clear();
         for (auto part : text::split(v, ',')) c.eval.classifiers.push_back(parse_classifier(part, l));
         if (c.eval.classifiers.empty()) fail(Errc::invalid_config, "no classifiers", l);
       },
       [](const PipelineConfig& c) {
         std::string s;
         for (auto k : c.eval.classifiers) s += (s.empty() ? "" : ",") + to_string(k);
         return s;
       }},
      ARC_BOOL("eval.cnn_on_patients", eval.cnn_on_patients),
      {"eval.train_population",
       [](PipelineConfig& c, std::string_view v, std::size_t l) {
         v = text::trim(v);
         if (v == "same") c.eval.train_population = TrainPopulation::same;
         else if (v == "healthy") c.eval.train_population = TrainPopulation::healthy;
         else fail(Errc::invalid_config, "eval.train_population must be same|healthy", l);
       },
       [](const PipelineConfig& c) {
         return std::string(c.eval.train_population == TrainPopulation::same ? "same" : "healthy");
       }},
      {"eval.window_grid",
       [](PipelineConfig& c, std::string_view v, std::size_t l) {
         c.eval.window_grid.clear();
         for (auto part : text::split(v, ','))
           if (!text::trim(part).empty()) c.eval.window_grid.push_back(as_double(part, l));
       },
       [](const PipelineConfig& c) {
         std::string s;
         for (double w : c.eval.window_grid) s += (s.empty() ? "" : ",") + num(w);
         return s;
       }},
  };
  return table;
}

#undef ARC_DOUBLE
#undef ARC_COUNT
#undef ARC_BOOL

}  // namespace config_detail

inline void validate(const PipelineConfig& c) {
  require_config(c.dataset.drift.highpass_window_s > 0, "drift.window_s must be > 0");
  validate(c.dataset.fusion);
  validate(c.dataset.rest);
  require_config(c.dataset.window.window_s > 0, "window.window_s must be > 0");
  validate(c.dataset.spot);
  require_config(c.dataset.overlap_threshold > 0 && c.dataset.overlap_threshold <= 1,
                 "dataset.overlap_threshold must be in (0,1]");
  require_config(c.dataset.cnn_action_window_s > 0, "dataset.cnn_action_window_s must be > 0");
  validate(c.svm);
  validate(c.split);
  require_config(c.cnn_train.batch_size >= 1, "cnn.batch_size must be >= 1");
  require_config(c.cnn.dropout >= 0 && c.cnn.dropout < 1, "cnn.dropout must be in [0,1)");
  require_config(c.synth.n_subjects >= 1, "synth.n_subjects must be >= 1");
  validate(c.synth.protocol);
  for (double w : c.eval.window_grid) require_config(w > 0, "eval.window_grid entries must be > 0");
}

// Applies the lines of `in` on top of `base`.
inline PipelineConfig parse_config(std::istream& in, PipelineConfig base = {}) {
  const auto& table = config_detail::entries();
  for (const auto& kv : text::parse_key_values(in)) {
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.key == kv.key; });
    if (it == table.end()) fail(Errc::unknown_key, "unknown key '" + kv.key + "'", kv.line);
    it->set(base, kv.value, kv.line);
  }
  validate(base);
  return base;
}

inline void write_config(std::ostream& out, const PipelineConfig& c) {
  for (const auto& e : config_detail::entries()) out << e.key << " = " << e.get(c) << '\n';
}

// Sub-seeds for every stage derive from the global seed.
inline PipelineConfig with_seed(PipelineConfig c, std::uint64_t seed) {
  c.seed = seed;
  return c;
}

}  // namespace arc
