#pragma once

// Shared fixtures for the unit tests.

#include "arc/data_model.hpp"
#include "arc/rng.hpp"

#include <cmath>

namespace test {

inline arc::RecordingMeta meta(arc::Wrist w, double rate = 100.0) {
  arc::RecordingMeta m;
  m.subject_id = "S01";
  m.wrist = w;
  m.sample_rate = rate;
  m.session_id = "S01_test";
  return m;
}

inline arc::Recording random_recording(arc::Rng& rng, std::size_t n, arc::Wrist w, double start_ms = 0.0) {
  arc::Matrix m(n, arc::kChannelCount);
  for (double& v : m.data()) v = arc::uniform(rng, -2.0, 2.0);
  auto md = meta(w);
  md.start_time_ms = start_ms;
  return arc::Recording(std::move(m), md);
}

inline double gaussian(arc::Rng& rng) {
  const double u = 1.0 - arc::uniform01(rng);
  return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586 * arc::uniform01(rng));
}

// Recording whose every channel is produced by f(sample, channel).
template <class F>
arc::Recording make_recording(std::size_t n, F&& f, double rate = 100.0, arc::Wrist w = arc::Wrist::right) {
  arc::Matrix m(n, arc::kChannelCount);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < arc::kChannelCount; ++c) m(i, c) = f(i, c);
  return arc::Recording(std::move(m), meta(w, rate));
}

}  // namespace test
