#pragma once

// Synthetic dual-wrist sessions with exact ground truth.
//
// Target movements are out-and-back reaches: a short dominant acceleration
// lobe along the class direction followed by a longer, weaker return lobe,
// plus a smooth rotation that returns to the start attitude. Non-target
// movements are longer multi-lobe templates, one per R class.

#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "arc/data_model.hpp"
#include "arc/preprocess.hpp"
#include "arc/rng.hpp"

namespace arc {

struct Lobe {
  double start;      // fraction of the movement duration
  double width;      // fraction of the movement duration
  double amplitude;  // m/s^2, relative to peak_accel for targets
  Vec3 direction;    // unit
};

// Signal template of one movement class, possibly jittered per subject.
struct MovementModel {
  MovementClass cls = MovementClass::M1;
  double duration_s = 2.0;
  double peak_accel = 3.0;  // m/s^2, height of the dominant lobe
  Vec3 direction{1, 0, 0};  // dominant-lobe direction, unit
  std::vector<Lobe> lobes;  // amplitudes relative to peak_accel
  Vec3 rotation_axis{0, 1, 0};  // weights on (roll, pitch, yaw), unit
  double rotation_rad = 1.0;
};

struct ProtocolConfig {
  Scenario scenario = Scenario::L1;
  double rest_s = 5.0;
  // L1: how many of M1..M4 are performed (each as dominant, non-dominant,
  // both). L2: number of target movements in the random sequence.
  std::size_t n_target = 4;
  std::size_t n_nontarget = 8;  // L2 only
  std::size_t l1_repetitions = 1;
  std::vector<MovementClass> l1_classes;  // overrides n_target when set
  double noise_std = 0.05;                // m/s^2
  double drift_rate = 0.01;               // m/s^3
  double instance_jitter = 0.1;
  double sample_rate = 100.0;
  Wrist dominant = Wrist::right;
  Population population = Population::healthy;
  // Amplitude factor on the affected wrist (patients only).
  std::optional<Wrist> affected_wrist;
  double affected_scale = 0.5;
  std::string subject_id = "S00";
  std::string session_id = "session";
  std::uint64_t seed = 0;
};

inline void validate(const ProtocolConfig& c) {
  require_config(c.rest_s >= 0, "synth.rest_s must be >= 0");
  require_config(c.noise_std >= 0 && c.drift_rate >= 0, "synth noise/drift must be >= 0");
  require_config(c.instance_jitter >= 0, "synth jitter must be >= 0");
  require_config(c.sample_rate > 0, "synth sample rate must be > 0");
  require_config(c.n_target <= kTargetClassCount || c.scenario == Scenario::L2,
                 "L1 has at most 4 target classes");
  require_config(c.affected_scale > 0, "synth.affected_scale must be > 0");
}

// A planted movement. Peak indices are the argmax of the noise-free
// acceleration norm inside [start, end) on each moving wrist.
struct PlantedMovement {
  MovementClass cls;
  std::size_t start;
  std::size_t end;
  bool left;
  bool right;
  std::optional<std::size_t> peak_left;
  std::optional<std::size_t> peak_right;

  bool on(Wrist w) const { return w == Wrist::left ? left : right; }
  std::optional<std::size_t> peak(Wrist w) const { return w == Wrist::left ? peak_left : peak_right; }
};

struct SynthSession {
  Session session;
  std::vector<PlantedMovement> planted;
};

namespace synth_detail {

inline Vec3 unit(Vec3 v) {
  const double n = norm(v);
  return {v[0] / n, v[1] / n, v[2] / n};
}

inline double bell(double u) { return u <= 0 || u >= 1 ? 0.0 : 16 * u * u * (1 - u) * (1 - u); }
inline double bell_slope(double u) { return u <= 0 || u >= 1 ? 0.0 : 32 * u * (1 - u) * (1 - 2 * u); }

// Small random rotation of a unit vector; angle ~ N(0, sigma).
inline Vec3 jitter_direction(const Vec3& d, double sigma, Rng& rng) {
  if (sigma <= 0) return d;
  std::normal_distribution<double> n01(0.0, 1.0);
  const Vec3 axis = unit({n01(rng), n01(rng), n01(rng)});
  return unit(Quaternion::from_axis_angle(axis, sigma * n01(rng)).rotate(d));
}

inline double jitter_scale(double sigma, Rng& rng) {
  if (sigma <= 0) return 1.0;
  std::normal_distribution<double> n01(0.0, 1.0);
  return std::exp(sigma * n01(rng));
}

inline const Vec3 kEarthField{22.0, 0.0, -40.0};  // µT, world frame

}  // namespace synth_detail

// Canonical target template: dominant lobe over the first 35% of the
// movement, return lobe of matching impulse over the rest.
inline MovementModel target_model(MovementClass cls) {
  using synth_detail::unit;
  struct Spec {
    Vec3 out, back;
    double duration, peak;
    Vec3 axis;
    double rot;
  };
  static const std::array<Spec, kTargetClassCount> specs = {{
      // shoulder extension/flexion: forward-up reach, pitch rotation
      {{1.0, 0.0, 0.35}, {-1.0, 0.25, -0.2}, 3.0, 3.0, {0.0, 1.0, 0.1}, 1.2},
      // shoulder abduction/adduction: lateral, roll rotation
      {{0.0, 1.0, 0.35}, {0.2, -1.0, -0.3}, 2.8, 2.8, {1.0, 0.0, 0.2}, 1.2},
      // external/internal shoulder rotation: vertical-ish, yaw rotation
      {{0.25, -0.35, 1.0}, {-0.2, 0.5, -1.0}, 2.4, 2.3, {0.1, 0.2, 1.0}, 1.0},
      // elbow flexion/extension: forward-up, stronger pitch, shorter
      {{0.8, 0.0, 0.6}, {-0.4, -0.6, -0.7}, 2.0, 3.2, {0.3, 1.0, 0.0}, 1.8},
  }};
  const auto& s = specs[static_cast<std::size_t>(index_of(cls))];
  constexpr double split = 0.35;
  const double back_amp = split / (1.0 - split);
  MovementModel m;
  m.cls = cls;
  m.duration_s = s.duration;
  m.peak_accel = s.peak;
  m.direction = unit(s.out);
  m.lobes = {{0.0, split, 1.0, m.direction}, {split, 1.0 - split, back_amp, unit(s.back)}};
  m.rotation_axis = unit(s.axis);
  m.rotation_rad = s.rot;
  return m;
}

// Non-target templates are fixed per class (seeded by the class index).
inline MovementModel nontarget_model(MovementClass cls) {
  using synth_detail::unit;
  Rng rng(0x5eed0000ULL + static_cast<std::uint64_t>(index_of(cls)));
  std::normal_distribution<double> n01(0.0, 1.0);
  MovementModel m;
  m.cls = cls;
  m.duration_s = uniform(rng, 3.0, 6.0);
  m.peak_accel = uniform(rng, 1.0, 2.5);
  const std::size_t lobes = 2 + uniform_index(rng, 3);
  for (std::size_t i = 0; i < lobes; ++i) {
    const double width = uniform(rng, 0.2, 0.45);
    const double start = uniform(rng, 0.0, 1.0 - width);
    const double amp = uniform(rng, 0.4, 1.0) * (uniform01(rng) < 0.5 ? -1.0 : 1.0);
    m.lobes.push_back({start, width, amp, unit({n01(rng), n01(rng), n01(rng)})});
  }
  m.direction = m.lobes.front().direction;
  m.rotation_axis = unit({n01(rng), n01(rng), n01(rng)});
  m.rotation_rad = uniform(rng, 0.3, 1.2);
  return m;
}

inline MovementModel canonical_model(MovementClass cls) {
  return is_target(cls) ? target_model(cls) : nontarget_model(cls);
}

// Per-subject (or per-instance) variation of duration, amplitude and
// directions; sigma = 0 returns the model unchanged.
inline MovementModel jitter_model(const MovementModel& base, double sigma, Rng& rng) {
  using namespace synth_detail;
  if (sigma <= 0) return base;
  MovementModel m = base;
  m.duration_s *= jitter_scale(sigma, rng);
  m.peak_accel *= jitter_scale(sigma, rng);
  m.rotation_rad *= jitter_scale(sigma, rng);
  const Vec3 before = m.direction;
  m.direction = jitter_direction(m.direction, sigma, rng);
  for (auto& l : m.lobes) {
    l.direction = l.direction == before ? m.direction : jitter_direction(l.direction, sigma, rng);
  }
  m.rotation_axis = jitter_direction(m.rotation_axis, sigma, rng);
  return m;
}

// Subject style: one jittered model per class.
using SubjectStyle = std::array<MovementModel, kTargetClassCount + kNonTargetClassCount>;

inline SubjectStyle make_subject_style(double subject_jitter, Rng& rng) {
  SubjectStyle style;
  for (int i = 0; i < kTargetClassCount + kNonTargetClassCount; ++i)
    style[static_cast<std::size_t>(i)] = jitter_model(canonical_model(class_from_index(i)), subject_jitter, rng);
  return style;
}

inline SubjectStyle canonical_style() {
  Rng unused(0);
  return make_subject_style(0.0, unused);
}

namespace synth_detail {

struct Timeline {
  Matrix signal;  // noise-free, 12 channels
  std::vector<LabelInterval> labels;
  std::size_t size() const { return signal.rows(); }
};

inline std::size_t samples_of(double seconds, double rate) {
  return static_cast<std::size_t>(std::llround(seconds * rate));
}

// Writes the movement's acceleration, rotation rate and attitude into rows
// [start, start + n) of `out`, scaled by `gain`.
inline void render(const MovementModel& m, std::size_t start, std::size_t n, double rate, double gain,
                   Matrix& out) {
  const double duration = static_cast<double>(n) / rate;
  for (std::size_t k = 0; k < n; ++k) {
    const double tau = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
    auto row = out.row(start + k);
    for (const auto& l : m.lobes) {
      const double b = bell((tau - l.start) / l.width);
      if (b == 0.0) continue;
      for (int a = 0; a < 3; ++a) row[kAccX + a] += gain * m.peak_accel * l.amplitude * b * l.direction[a];
    }
    const double angle = gain * m.rotation_rad * bell(tau);
    const double rate_ = gain * m.rotation_rad * bell_slope(tau) / duration;
    // rotation_axis weights are (roll, pitch, yaw); gyro is (x, y, z).
    for (int a = 0; a < 3; ++a) row[kGyrX + a] += rate_ * m.rotation_axis[a];
    row[kAttYaw + 0] += angle * m.rotation_axis[2];
    row[kAttYaw + 1] += angle * m.rotation_axis[1];
    row[kAttYaw + 2] += angle * m.rotation_axis[0];
  }
}

}  // namespace synth_detail

// Generates one session. L1 follows the protocol order per target class:
// dominant hand, rest, non-dominant hand, rest, both hands, rest. L2 is a
// seeded random interleaving of target and non-target movements with short
// pauses. Label tracks cover every sample (Rest between movements).
inline SynthSession synth_session(const ProtocolConfig& cfg, const SubjectStyle& style) {
  using namespace synth_detail;
  validate(cfg);
  Rng rng(cfg.seed);
  const double rate = cfg.sample_rate;

  struct Event {
    MovementClass cls;
    bool left, right;
    std::size_t gap_before;  // rest samples preceding the movement
  };
  std::vector<Event> events;
  const Wrist nondominant = cfg.dominant == Wrist::left ? Wrist::right : Wrist::left;
  auto on = [](Wrist w) { return std::pair{w == Wrist::left, w == Wrist::right}; };

  std::size_t trailing_rest = samples_of(cfg.rest_s, rate);
  if (cfg.scenario == Scenario::L1) {
    std::vector<MovementClass> classes = cfg.l1_classes;
    if (classes.empty())
      for (std::size_t i = 0; i < cfg.n_target; ++i) classes.push_back(target_class(static_cast<int>(i)));
    const std::size_t rest = samples_of(cfg.rest_s, rate);
    for (auto cls : classes) {
      if (!is_target(cls)) fail(Errc::invalid_config, "L1 sessions contain only target movements");
      for (std::size_t r = 0; r < cfg.l1_repetitions; ++r) {
        const auto [dl, dr] = on(cfg.dominant);
        const auto [nl, nr] = on(nondominant);
        events.push_back({cls, dl, dr, rest});
        events.push_back({cls, nl, nr, rest});
        events.push_back({cls, true, true, rest});
      }
    }
  } else {
    std::vector<MovementClass> seq;
    for (std::size_t i = 0; i < cfg.n_target; ++i)
      seq.push_back(target_class(static_cast<int>(uniform_index(rng, kTargetClassCount))));
    for (std::size_t i = 0; i < cfg.n_nontarget; ++i)
      seq.push_back(non_target_class(static_cast<int>(uniform_index(rng, kNonTargetClassCount))));
    shuffle(seq, rng);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const std::size_t pick = uniform_index(rng, 3);
      const bool left = pick != 1, right = pick != 0;
      const std::size_t gap = i == 0 ? samples_of(cfg.rest_s / 2, rate)
                                     : samples_of(uniform(rng, 0.5, 2.0), rate);
      events.push_back({seq[i], left, right, gap});
    }
    trailing_rest = samples_of(cfg.rest_s / 2, rate);
  }

  // Draw instances, then lay out the timeline.
  struct Instance {
    Event ev;
    std::size_t start, n;
    MovementModel left, right;
  };
  std::vector<Instance> instances;
  std::size_t cursor = 0;
  for (const auto& ev : events) {
    const MovementModel& base = style[static_cast<std::size_t>(index_of(ev.cls))];
    const double sigma = is_target(ev.cls) ? cfg.instance_jitter : 3 * cfg.instance_jitter;
    Instance in{ev, 0, 0, jitter_model(base, sigma, rng), base};
    in.right = jitter_model(base, sigma, rng);
    in.right.duration_s = in.left.duration_s;
    cursor += ev.gap_before;
    in.start = cursor;
    in.n = std::max<std::size_t>(2, samples_of(in.left.duration_s, rate));
    cursor += in.n;
    instances.push_back(std::move(in));
  }
  const std::size_t total = cursor + trailing_rest;

  Matrix sig[2] = {Matrix(total, kChannelCount), Matrix(total, kChannelCount)};
  std::vector<LabelInterval> labels[2];
  std::vector<PlantedMovement> planted;
  for (const auto& in : instances) {
    PlantedMovement pm{in.ev.cls, in.start, in.start + in.n, in.ev.left, in.ev.right, {}, {}};
    for (int w = 0; w < 2; ++w) {
      const bool moving = w == 0 ? in.ev.left : in.ev.right;
      if (!moving) continue;
      const Wrist wrist = w == 0 ? Wrist::left : Wrist::right;
      const double gain =
          cfg.population == Population::patient && cfg.affected_wrist == wrist ? cfg.affected_scale : 1.0;
      render(w == 0 ? in.left : in.right, in.start, in.n, rate, gain, sig[w]);
      labels[w].push_back({in.start, in.start + in.n, in.ev.cls});
      std::size_t peak = in.start;
      double best = -1.0;
      for (std::size_t i = in.start; i < in.start + in.n; ++i) {
        const auto r = sig[w].row(i);
        const double v = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
        if (v > best) {
          best = v;
          peak = i;
        }
      }
      (w == 0 ? pm.peak_left : pm.peak_right) = peak;
    }
    planted.push_back(pm);
  }

  // Magnetometer follows the attitude; then noise and drift on acceleration.
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int w = 0; w < 2; ++w) {
    const Vec3 drift_dir = unit({noise(rng), noise(rng), noise(rng)});
    for (std::size_t i = 0; i < total; ++i) {
      auto r = sig[w].row(i);
      const Quaternion q = Quaternion::from_euler(r[kAttYaw], r[kAttYaw + 1], r[kAttYaw + 2]);
      const Vec3 mag = q.conjugate().rotate(kEarthField);
      const double t = static_cast<double>(i) / rate;
      for (int a = 0; a < 3; ++a) {
        r[kMagX + a] = mag[a];
        r[kAccX + a] += cfg.drift_rate * t * drift_dir[a];
        if (cfg.noise_std > 0) r[kAccX + a] += cfg.noise_std * noise(rng);
      }
    }
  }

  auto fill_rest = [total](std::vector<LabelInterval> ivs) {
    std::vector<LabelInterval> out;
    std::size_t pos = 0;
    for (const auto& iv : ivs) {
      if (iv.start > pos) out.push_back({pos, iv.start, MovementClass::Rest});
      out.push_back(iv);
      pos = iv.end;
    }
    if (pos < total) out.push_back({pos, total, MovementClass::Rest});
    return LabelTrack(std::move(out));
  };

  auto meta = [&](Wrist w) {
    RecordingMeta m;
    m.subject_id = cfg.subject_id;
    m.wrist = w;
    m.scenario = cfg.scenario;
    m.population = cfg.population;
    m.sample_rate = rate;
    m.start_time_ms = 0.0;
    m.session_id = cfg.session_id;
    return m;
  };
  Session s{Recording(std::move(sig[0]), meta(Wrist::left)),
            Recording(std::move(sig[1]), meta(Wrist::right)), fill_rest(labels[0]),
            fill_rest(labels[1]), cfg.session_id};
  return {std::move(s), std::move(planted)};
}

inline SynthSession synth_session(const ProtocolConfig& cfg) {
  return synth_session(cfg, canonical_style());
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

struct CorpusConfig {
  ProtocolConfig protocol;  // template; scenario, ids and seed are overwritten
  std::size_t n_subjects = 25;
  std::size_t l1_repetitions = 2;
  std::size_t l2_sessions = 3;
  std::size_t l2_targets = 8;
  std::size_t l2_nontargets = 8;
  double subject_jitter = 0.15;
  std::uint64_t seed = 0;
};

struct CorpusEntry {
  std::string session_id;
  std::string subject_id;
  Scenario scenario;
  std::uint64_t seed;
  ProtocolConfig protocol;
  std::size_t subject_index;
};

// Session plan: per subject, one L1 session per target class followed by
// the L2 sessions. Subject and session seeds derive from the corpus seed.
inline std::vector<CorpusEntry> corpus_plan(const CorpusConfig& cfg) {
  require_config(cfg.n_subjects >= 1, "synth.n_subjects must be >= 1");
  std::vector<CorpusEntry> plan;
  for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
    char sid[16];
    std::snprintf(sid, sizeof sid, "S%02zu", s + 1);
    const std::uint64_t subject_seed = sub_seed(cfg.seed, static_cast<std::uint64_t>(s));
    std::size_t k = 0;
    auto add = [&](Scenario sc, std::string name, ProtocolConfig p) {
      p.scenario = sc;
      p.subject_id = sid;
      p.session_id = std::string(sid) + "_" + name;
      p.seed = sub_seed(subject_seed, static_cast<std::uint64_t>(++k));
      plan.push_back({p.session_id, sid, sc, p.seed, p, s});
    };
    for (int m = 0; m < kTargetClassCount; ++m) {
      ProtocolConfig p = cfg.protocol;
      p.l1_classes = {target_class(m)};
      p.l1_repetitions = cfg.l1_repetitions;
      add(Scenario::L1, "L1_M" + std::to_string(m + 1), p);
    }
    for (std::size_t j = 0; j < cfg.l2_sessions; ++j) {
      ProtocolConfig p = cfg.protocol;
      p.n_target = cfg.l2_targets;
      p.n_nontarget = cfg.l2_nontargets;
      add(Scenario::L2, "L2_" + std::to_string(j + 1), p);
    }
  }
  return plan;
}

inline SubjectStyle subject_style(const CorpusConfig& cfg, std::size_t subject_index) {
  Rng rng(sub_seed(sub_seed(cfg.seed, static_cast<std::uint64_t>(subject_index)), "style"));
  return make_subject_style(cfg.subject_jitter, rng);
}

inline SynthSession synth_entry(const CorpusConfig& cfg, const CorpusEntry& e) {
  return synth_session(e.protocol, subject_style(cfg, e.subject_index));
}

inline std::vector<SynthSession> synth_corpus(const CorpusConfig& cfg) {
  std::vector<SynthSession> out;
  for (const auto& e : corpus_plan(cfg)) out.push_back(synth_entry(cfg, e));
  return out;
}

}  // namespace arc
