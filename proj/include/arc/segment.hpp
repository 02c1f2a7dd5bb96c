#pragma once

// Candidate segments from a recording: rest-bounded action segmentation,
// non-overlapping sliding windows and peak-anchored gesture spotting.

#include <cmath>
#include <optional>
#include <vector>

#include "arc/data_model.hpp"
#include "arc/preprocess.hpp"

namespace arc {

struct RestConfig {
  double energy_window_s = 0.5;
  double energy_threshold = 0.05;  // (m/s^2)^2
  double min_rest_s = 2.0;
  double min_action_s = 0.5;
};

inline void validate(const RestConfig& c) {
  require_config(c.energy_window_s > 0 && c.energy_threshold > 0 && c.min_rest_s > 0 &&
                     c.min_action_s > 0,
                 "rest parameters must be positive");
  require_config(c.min_rest_s <= 5.0, "rest.min_rest_s must not exceed the 5 s protocol rest");
}

struct WindowConfig {
  double window_s = 3.0;
};

struct SpotConfig {
  double margin_before_s = 0.25;
  double margin_after_s = 0.25;
  // Empty selects the Euclidean norm of the acceleration channels.
  std::optional<ChannelId> peak_channel;
};

inline void validate(const SpotConfig& c) {
  require_config(c.margin_before_s >= 0 && c.margin_after_s >= 0, "spot margins must be >= 0");
}

inline std::size_t seconds_to_samples(double s, double rate) {
  return static_cast<std::size_t>(std::llround(s * rate));
}

inline std::vector<double> acceleration_norm(const Recording& rec) {
  const Matrix& m = rec.samples();
  std::vector<double> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    out[i] = std::sqrt(m(i, kAccX) * m(i, kAccX) + m(i, kAccX + 1) * m(i, kAccX + 1) +
                       m(i, kAccX + 2) * m(i, kAccX + 2));
  return out;
}

// Windowed mean of the squared acceleration norm. Expects a drift-free
// recording.
inline std::vector<double> short_time_energy(const Recording& rec, const RestConfig& cfg) {
  validate(cfg);
  const Matrix& m = rec.samples();
  std::vector<double> sq(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0;
    for (std::size_t k = 0; k < 3; ++k) s += m(i, kAccX + k) * m(i, kAccX + k);
    sq[i] = s;
  }
  const std::size_t w = std::max<std::size_t>(1, seconds_to_samples(cfg.energy_window_s, rec.sample_rate()));
  return dsp::windowed_mean(sq, w);
}

// Rest is a run of at least min_rest_s with energy below the threshold; the
// maximal non-rest runs lasting at least min_action_s become segments.
inline std::vector<Segment> segment_by_rest(const Recording& rec, const RestConfig& cfg) {
  const auto energy = short_time_energy(rec, cfg);
  const std::size_t n = energy.size();
  const std::size_t min_rest = std::max<std::size_t>(1, seconds_to_samples(cfg.min_rest_s, rec.sample_rate()));
  const std::size_t min_action =
      std::max<std::size_t>(1, seconds_to_samples(cfg.min_action_s, rec.sample_rate()));

  std::vector<bool> rest(n, false);
  for (std::size_t i = 0; i < n;) {
    if (energy[i] >= cfg.energy_threshold) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && energy[j] < cfg.energy_threshold) ++j;
    if (j - i >= min_rest) std::fill(rest.begin() + static_cast<std::ptrdiff_t>(i),
                                     rest.begin() + static_cast<std::ptrdiff_t>(j), true);
    i = j;
  }

  std::vector<Segment> out;
  const std::string ref = rec.ref();
  for (std::size_t i = 0; i < n;) {
    if (rest[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && !rest[j]) ++j;
    if (j - i >= min_action) out.emplace_back(ref, i, j);
    i = j;
  }
  return out;
}

inline std::size_t window_samples(const WindowConfig& cfg, double sample_rate) {
  require_config(cfg.window_s > 0, "window_s must be > 0");
  const std::size_t w = seconds_to_samples(cfg.window_s, sample_rate);
  require_config(w >= 1, "window shorter than one sample");
  return w;
}

// Consecutive windows of W samples from index 0; a shorter tail is dropped.
inline std::vector<Segment> sliding_windows(const Recording& rec, const WindowConfig& cfg) {
  const std::size_t w = window_samples(cfg, rec.sample_rate());
  std::vector<Segment> out;
  const std::string ref = rec.ref();
  for (std::size_t s = 0; s + w <= rec.size(); s += w) out.emplace_back(ref, s, s + w);
  return out;
}

inline std::vector<double> peak_channel_series(const Recording& rec, const SpotConfig& cfg) {
  if (cfg.peak_channel) return rec.samples().column(cfg.peak_channel->index());
  return acceleration_norm(rec);
}

// Region around the segment's global peak (earliest on ties), clamped to
// the segment.
inline Segment spot_gesture(const Recording& rec, const Segment& seg, const SpotConfig& cfg,
                            std::span<const double> peak_series) {
  validate(cfg);
  if (seg.end > rec.size() || peak_series.size() != rec.size())
    fail(Errc::out_of_range, "segment outside recording");
  std::size_t p = seg.start;
  for (std::size_t i = seg.start + 1; i < seg.end; ++i)
    if (peak_series[i] > peak_series[p]) p = i;
  const std::size_t before = seconds_to_samples(cfg.margin_before_s, rec.sample_rate());
  const std::size_t after = seconds_to_samples(cfg.margin_after_s, rec.sample_rate());
  const std::size_t start = p - std::min(before, p - seg.start);
  const std::size_t end = std::min(seg.end, p + after + 1);
  return Segment(seg.recording_ref, start, end, seg.label);
}

inline Segment spot_gesture(const Recording& rec, const Segment& seg, const SpotConfig& cfg) {
  const auto series = peak_channel_series(rec, cfg);
  return spot_gesture(rec, seg, cfg, series);
}

}  // namespace arc
