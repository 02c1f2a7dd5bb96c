#pragma once

// Core domain types for dual-wrist IMU sessions, their on-disk formats, and
// ingestion-time alignment.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "arc/error.hpp"
#include "arc/matrix.hpp"
#include "arc/text.hpp"

namespace arc {

// ---------------------------------------------------------------------------
// Movement classes
// ---------------------------------------------------------------------------

inline constexpr int kTargetClassCount = 4;
inline constexpr int kNonTargetClassCount = 19;

// M1..M4 are the target movements, R1..R19 the daily-life non-target ones.
// The underlying value is the class index used for tie-breaking.
enum class MovementClass : std::uint8_t {
  M1 = 0, M2, M3, M4,
  R1, R2, R3, R4, R5, R6, R7, R8, R9, R10,
  R11, R12, R13, R14, R15, R16, R17, R18, R19,
  Rest, Null,
};

inline constexpr int kMovementClassCount = 25;

enum class ClassKind { target, non_target, rest, null };

constexpr int index_of(MovementClass c) { return static_cast<int>(c); }

constexpr MovementClass class_from_index(int i) { return static_cast<MovementClass>(i); }

constexpr MovementClass target_class(int i) { return class_from_index(i); }  // 0-based

constexpr MovementClass non_target_class(int j) {  // 0-based
  return class_from_index(kTargetClassCount + j);
}

constexpr ClassKind kind_of(MovementClass c) {
  const int i = index_of(c);
  if (i < kTargetClassCount) return ClassKind::target;
  if (i < kTargetClassCount + kNonTargetClassCount) return ClassKind::non_target;
  return c == MovementClass::Rest ? ClassKind::rest : ClassKind::null;
}

constexpr bool is_target(MovementClass c) { return kind_of(c) == ClassKind::target; }
constexpr bool is_non_target(MovementClass c) { return kind_of(c) == ClassKind::non_target; }

inline std::string to_string(MovementClass c) {
  const int i = index_of(c);
  if (i < kTargetClassCount) return "M" + std::to_string(i + 1);
  if (i < kTargetClassCount + kNonTargetClassCount)
    return "R" + std::to_string(i - kTargetClassCount + 1);
  return c == MovementClass::Rest ? "Rest" : "Null";
}

inline std::optional<MovementClass> try_parse_class(std::string_view s) {
  s = text::trim(s);
  if (s == "Rest") return MovementClass::Rest;
  if (s == "Null") return MovementClass::Null;
  if (s.size() < 2 || (s[0] != 'M' && s[0] != 'R')) return std::nullopt;
  int n = 0;
  for (char ch : s.substr(1)) {
    if (ch < '0' || ch > '9') return std::nullopt;
    n = n * 10 + (ch - '0');
    if (n > 100) return std::nullopt;
  }
  if (s[1] == '0') return std::nullopt;
  if (s[0] == 'M' && n >= 1 && n <= kTargetClassCount) return target_class(n - 1);
  if (s[0] == 'R' && n >= 1 && n <= kNonTargetClassCount) return non_target_class(n - 1);
  return std::nullopt;
}

inline MovementClass parse_class(std::string_view s, std::size_t line = 0) {
  if (auto c = try_parse_class(s)) return *c;
  fail(Errc::unknown_class, "'" + std::string(s) + "'", line);
}

// ---------------------------------------------------------------------------
// Channels
// ---------------------------------------------------------------------------

enum class Sensor : std::uint8_t { acceleration, rotation_rate, magnetometer, attitude };
// x/y/z for vector sensors; yaw/pitch/roll for attitude.
enum class Axis : std::uint8_t { x_yaw, y_pitch, z_roll };

inline constexpr std::size_t kChannelCount = 12;

struct ChannelId {
  Sensor sensor;
  Axis axis;

  // Canonical column: acc xyz, gyro xyz, mag xyz, attitude yaw/pitch/roll.
  constexpr std::size_t index() const {
    return static_cast<std::size_t>(sensor) * 3 + static_cast<std::size_t>(axis);
  }
  static constexpr ChannelId from_index(std::size_t i) {
    return {static_cast<Sensor>(i / 3), static_cast<Axis>(i % 3)};
  }
  friend constexpr auto operator<=>(const ChannelId&, const ChannelId&) = default;
};

inline constexpr std::array<std::string_view, kChannelCount> kChannelNames = {
    "acc_x", "acc_y", "acc_z", "gyr_x", "gyr_y", "gyr_z",
    "mag_x", "mag_y", "mag_z", "att_yaw", "att_pitch", "att_roll"};

inline std::string_view channel_name(ChannelId c) { return kChannelNames[c.index()]; }

inline std::optional<ChannelId> try_parse_channel(std::string_view s) {
  s = text::trim(s);
  for (std::size_t i = 0; i < kChannelCount; ++i)
    if (kChannelNames[i] == s) return ChannelId::from_index(i);
  return std::nullopt;
}

inline std::vector<ChannelId> all_channels() {
  std::vector<ChannelId> out;
  for (std::size_t i = 0; i < kChannelCount; ++i) out.push_back(ChannelId::from_index(i));
  return out;
}

inline std::vector<ChannelId> sensor_channels(Sensor s) {
  return {{s, Axis::x_yaw}, {s, Axis::y_pitch}, {s, Axis::z_roll}};
}

inline constexpr std::size_t kAccX = 0, kGyrX = 3, kMagX = 6, kAttYaw = 9;

// ---------------------------------------------------------------------------
// Recording metadata
// ---------------------------------------------------------------------------

enum class Wrist : std::uint8_t { left, right };
enum class Scenario : std::uint8_t { L1, L2 };
enum class Population : std::uint8_t { healthy, patient };

inline std::string to_string(Wrist w) { return w == Wrist::left ? "left" : "right"; }
inline std::string to_string(Scenario s) { return s == Scenario::L1 ? "L1" : "L2"; }
inline std::string to_string(Population p) { return p == Population::healthy ? "healthy" : "patient"; }

inline Wrist parse_wrist(std::string_view s, std::size_t line = 0) {
  s = text::trim(s);
  if (s == "left") return Wrist::left;
  if (s == "right") return Wrist::right;
  fail(Errc::invalid_config, "wrist must be left|right, got '" + std::string(s) + "'", line);
}

inline Scenario parse_scenario(std::string_view s, std::size_t line = 0) {
  s = text::trim(s);
  if (s == "L1") return Scenario::L1;
  if (s == "L2") return Scenario::L2;
  fail(Errc::invalid_config, "scenario must be L1|L2, got '" + std::string(s) + "'", line);
}

inline Population parse_population(std::string_view s, std::size_t line = 0) {
  s = text::trim(s);
  if (s == "healthy") return Population::healthy;
  if (s == "patient") return Population::patient;
  fail(Errc::invalid_config, "population must be healthy|patient, got '" + std::string(s) + "'",
       line);
}

struct RecordingMeta {
  std::string subject_id;
  Wrist wrist = Wrist::right;
  Scenario scenario = Scenario::L1;
  Population population = Population::healthy;
  double sample_rate = 100.0;  // Hz
  double start_time_ms = 0.0;  // epoch milliseconds
  std::string session_id;

  double period_ms() const { return 1000.0 / sample_rate; }
  friend bool operator==(const RecordingMeta&, const RecordingMeta&) = default;
};

// Sidecar `key=value` file. start_time comes from the CSV itself.
inline RecordingMeta parse_metadata(std::istream& in) {
  RecordingMeta m;
  bool seen[5] = {};
  for (const auto& kv : text::parse_key_values(in)) {
    if (kv.key == "subject_id") {
      m.subject_id = kv.value;
      seen[0] = true;
    } else if (kv.key == "wrist") {
      m.wrist = parse_wrist(kv.value, kv.line);
      seen[1] = true;
    } else if (kv.key == "scenario") {
      m.scenario = parse_scenario(kv.value, kv.line);
      seen[2] = true;
    } else if (kv.key == "population") {
      m.population = parse_population(kv.value, kv.line);
      seen[3] = true;
    } else if (kv.key == "sample_rate_hz") {
      m.sample_rate = text::to_double(kv.value, kv.line, Errc::invalid_config);
      if (!(m.sample_rate > 0.0)) fail(Errc::invalid_config, "sample_rate_hz must be > 0", kv.line);
      seen[4] = true;
    } else if (kv.key == "session_id") {
      m.session_id = kv.value;
    } else {
      fail(Errc::unknown_key, kv.key, kv.line);
    }
  }
  static constexpr const char* names[] = {"subject_id", "wrist", "scenario", "population",
                                          "sample_rate_hz"};
  for (int i = 0; i < 5; ++i)
    if (!seen[i]) fail(Errc::invalid_config, std::string("missing metadata key ") + names[i]);
  return m;
}

inline void write_metadata(std::ostream& out, const RecordingMeta& m) {
  out << "subject_id=" << m.subject_id << '\n'
      << "wrist=" << to_string(m.wrist) << '\n'
      << "scenario=" << to_string(m.scenario) << '\n'
      << "population=" << to_string(m.population) << '\n'
      << "sample_rate_hz=" << text::fmt_exact(m.sample_rate) << '\n';
  if (!m.session_id.empty()) out << "session_id=" << m.session_id << '\n';
}

// ---------------------------------------------------------------------------
// Recording
// ---------------------------------------------------------------------------

// Uniform-rate 12-channel time series. Sample i is taken at
// start_time_ms + i * 1000 / sample_rate.
class Recording {
 public:
  Recording(Matrix samples, RecordingMeta meta) : samples_(std::move(samples)), meta_(std::move(meta)) {
    if (samples_.cols() != kChannelCount)
      fail(Errc::shape_mismatch, "recording must have 12 channels");
    if (samples_.rows() == 0) fail(Errc::empty_stream, "recording has no samples");
    if (!(meta_.sample_rate > 0.0) || !std::isfinite(meta_.sample_rate))
      fail(Errc::invalid_config, "sample_rate must be > 0");
    for (double v : samples_.data())
      if (!std::isfinite(v)) fail(Errc::non_finite, "recording contains a non-finite value");
  }

  const Matrix& samples() const noexcept { return samples_; }
  const RecordingMeta& meta() const noexcept { return meta_; }
  std::size_t size() const noexcept { return samples_.rows(); }
  double sample_rate() const noexcept { return meta_.sample_rate; }
  double duration_s() const noexcept { return static_cast<double>(size()) / meta_.sample_rate; }
  double time_ms(std::size_t i) const {
    return meta_.start_time_ms + static_cast<double>(i) * 1000.0 / meta_.sample_rate;
  }

  // Identity used by Segment::recording_ref.
  std::string ref() const {
    return meta_.session_id + "/" + meta_.subject_id + "/" + to_string(meta_.wrist);
  }

  Recording with_samples(Matrix samples) const { return Recording(std::move(samples), meta_); }

  friend bool operator==(const Recording&, const Recording&) = default;

 private:
  Matrix samples_;
  RecordingMeta meta_;
};

inline constexpr std::string_view kRecordingHeader =
    "t_ms,acc_x,acc_y,acc_z,gyr_x,gyr_y,gyr_z,mag_x,mag_y,mag_z,att_yaw,att_pitch,att_roll";

// Parses the recording CSV. The header line is optional but must match
// exactly when present. `meta.start_time_ms` is taken from the first row.
inline Recording parse_recording(std::istream& in, RecordingMeta meta) {
  if (!(meta.sample_rate > 0.0)) fail(Errc::invalid_config, "sample_rate must be > 0");
  const double period = meta.period_ms();
  std::vector<double> values;
  std::string raw;
  std::size_t line = 0;
  std::size_t rows = 0;
  double prev_t = 0.0;
  double first_t = 0.0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view s = text::trim(raw);
    if (s.empty()) continue;
    if (rows == 0 && values.empty() && !s.empty() && s.front() == 't') {
      if (s != kRecordingHeader) fail(Errc::malformed_row, "unexpected header", line);
      continue;
    }
    const auto cols = text::split(s, ',');
    if (cols.size() != kChannelCount + 1)
      fail(Errc::malformed_row, "expected 13 columns, got " + std::to_string(cols.size()), line);
    const double t = text::to_double(cols[0], line);
    if (!std::isfinite(t)) fail(Errc::non_finite, "timestamp", line);
    if (rows > 0) {
      const double dt = t - prev_t;
      if (!(dt > 0.0)) fail(Errc::non_monotone_timestamps, "timestamps must increase", line);
      if (dt > 1.5 * period)
        fail(Errc::timestamp_gap,
             "gap of " + text::fmt_ms(dt) + " ms exceeds 1.5 sample periods", line);
    } else {
      first_t = t;
    }
    prev_t = t;
    for (std::size_t c = 1; c < cols.size(); ++c) {
      const double v = text::to_double(cols[c], line);
      if (!std::isfinite(v)) fail(Errc::non_finite, std::string(kChannelNames[c - 1]), line);
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) fail(Errc::empty_stream, "no samples");
  meta.start_time_ms = first_t;
  return Recording(Matrix(rows, kChannelCount, std::move(values)), std::move(meta));
}

inline void write_recording(std::ostream& out, const Recording& rec) {
  out << kRecordingHeader << '\n';
  const auto& m = rec.samples();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << text::fmt_ms(rec.time_ms(r));
    for (double v : m.row(r)) out << ',' << text::fmt_exact(v);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

struct LabelInterval {
  std::size_t start;  // sample index, inclusive
  std::size_t end;    // sample index, exclusive
  MovementClass cls;
  friend bool operator==(const LabelInterval&, const LabelInterval&) = default;
};

// Sorted, non-overlapping intervals; touching neighbours never share a class.
class LabelTrack {
 public:
  LabelTrack() = default;

  // Sorts, validates and merges. Throws on overlap or empty intervals.
  explicit LabelTrack(std::vector<LabelInterval> intervals) {
    std::stable_sort(intervals.begin(), intervals.end(),
                     [](const auto& a, const auto& b) { return a.start < b.start; });
    for (std::size_t i = 0; i < intervals.size(); ++i) {
      const auto& iv = intervals[i];
      if (iv.end <= iv.start)
        fail(Errc::empty_interval, "interval [" + std::to_string(iv.start) + "," +
                                       std::to_string(iv.end) + ") is empty");
      if (!intervals_.empty()) {
        auto& last = intervals_.back();
        if (iv.start < last.end)
          fail(Errc::overlapping_intervals,
               "[" + std::to_string(iv.start) + "," + std::to_string(iv.end) + ") overlaps [" +
                   std::to_string(last.start) + "," + std::to_string(last.end) + ")");
        if (iv.start == last.end && iv.cls == last.cls) {
          last.end = iv.end;
          continue;
        }
      }
      intervals_.push_back(iv);
    }
  }

  const std::vector<LabelInterval>& intervals() const noexcept { return intervals_; }
  bool empty() const noexcept { return intervals_.empty(); }
  std::size_t size() const noexcept { return intervals_.size(); }

  std::size_t end_index() const { return intervals_.empty() ? 0 : intervals_.back().end; }

  // Samples of each class inside [start, end); unlabeled samples count as Null.
  std::map<MovementClass, std::size_t> overlap(std::size_t start, std::size_t end) const {
    std::map<MovementClass, std::size_t> counts;
    std::size_t labeled = 0;
    for (const auto& iv : intervals_) {
      if (iv.end <= start) continue;
      if (iv.start >= end) break;
      const std::size_t n = std::min(end, iv.end) - std::max(start, iv.start);
      counts[iv.cls] += n;
      labeled += n;
    }
    if (end > start && labeled < end - start) counts[MovementClass::Null] += end - start - labeled;
    return counts;
  }

  // Shift by -offset, clip to [0, length). Intervals that vanish are dropped.
  LabelTrack shifted_and_clipped(std::size_t offset, std::size_t length) const {
    std::vector<LabelInterval> out;
    for (const auto& iv : intervals_) {
      if (iv.end <= offset) continue;
      const std::size_t s = iv.start > offset ? iv.start - offset : 0;
      const std::size_t e = std::min(iv.end - offset, length);
      if (e > s) out.push_back({s, e, iv.cls});
    }
    return LabelTrack(std::move(out));
  }

  friend bool operator==(const LabelTrack&, const LabelTrack&) = default;

 private:
  std::vector<LabelInterval> intervals_;
};

// Nearest sample index for a millisecond offset; exact ties go to the
// earlier sample.
inline std::size_t ms_to_index(double ms, double sample_rate) {
  const double x = ms * sample_rate / 1000.0;
  const double r = std::ceil(x - 0.5);
  return r <= 0.0 ? 0 : static_cast<std::size_t>(r);
}

inline double index_to_ms(std::size_t index, double sample_rate) {
  return static_cast<double>(index) * 1000.0 / sample_rate;
}

// Label CSV `start_ms,end_ms,class`, times relative to the recording start.
// An optional header line is accepted.
inline LabelTrack parse_labels(std::istream& in, double sample_rate = 100.0) {
  std::vector<LabelInterval> intervals;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto s = text::trim(raw);
    if (s.empty()) continue;
    if (intervals.empty() && s == "start_ms,end_ms,class") continue;
    const auto cols = text::split(s, ',');
    if (cols.size() != 3) fail(Errc::malformed_row, "expected start_ms,end_ms,class", line);
    const double start_ms = text::to_double(cols[0], line);
    const double end_ms = text::to_double(cols[1], line);
    if (!std::isfinite(start_ms) || !std::isfinite(end_ms) || start_ms < 0)
      fail(Errc::malformed_row, "bad interval bounds", line);
    const MovementClass cls = parse_class(cols[2], line);
    if (end_ms <= start_ms) fail(Errc::empty_interval, "end <= start", line);
    const auto a = ms_to_index(start_ms, sample_rate);
    const auto b = ms_to_index(end_ms, sample_rate);
    if (b <= a) fail(Errc::empty_interval, "interval shorter than one sample", line);
    intervals.push_back({a, b, cls});
  }
  return LabelTrack(std::move(intervals));
}

inline void write_labels(std::ostream& out, const LabelTrack& track, double sample_rate = 100.0) {
  out << "start_ms,end_ms,class\n";
  for (const auto& iv : track.intervals())
    out << text::fmt_ms(index_to_ms(iv.start, sample_rate)) << ','
        << text::fmt_ms(index_to_ms(iv.end, sample_rate)) << ',' << to_string(iv.cls) << '\n';
}

// ---------------------------------------------------------------------------
// Segments
// ---------------------------------------------------------------------------

// Half-open sample interval [start, end) of a recording.
struct Segment {
  std::string recording_ref;
  std::size_t start = 0;
  std::size_t end = 1;
  std::optional<MovementClass> label;

  Segment(std::string ref, std::size_t start_index, std::size_t end_index,
          std::optional<MovementClass> lbl = std::nullopt)
      : recording_ref(std::move(ref)), start(start_index), end(end_index), label(lbl) {
    if (start >= end)
      fail(Errc::out_of_range, "segment start must be < end (" + std::to_string(start) + "," +
                                   std::to_string(end) + ")");
  }

  std::size_t length() const noexcept { return end - start; }
  bool contains(std::size_t i) const noexcept { return i >= start && i < end; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

inline Matrix slice(const Recording& rec, const Segment& seg) {
  if (seg.end > rec.size())
    fail(Errc::out_of_range, "segment [" + std::to_string(seg.start) + "," +
                                 std::to_string(seg.end) + ") exceeds recording length " +
                                 std::to_string(rec.size()));
  return rec.samples().row_range(seg.start, seg.end);
}

inline void write_segments(std::ostream& out, const std::vector<Segment>& segs) {
  out << "start_index,end_index,label\n";
  for (const auto& s : segs)
    out << s.start << ',' << s.end << ',' << (s.label ? to_string(*s.label) : "") << '\n';
}

inline std::vector<Segment> parse_segments(std::istream& in, const std::string& ref = {}) {
  std::vector<Segment> out;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto s = text::trim(raw);
    if (s.empty() || s.starts_with("start_index")) continue;
    const auto cols = text::split(s, ',');
    if (cols.size() < 2 || cols.size() > 3) fail(Errc::malformed_row, "segment row", line);
    const auto a = text::to_int(cols[0], line);
    const auto b = text::to_int(cols[1], line);
    if (a < 0 || b < 0) fail(Errc::malformed_row, "negative index", line);
    std::optional<MovementClass> lbl;
    if (cols.size() == 3 && !text::trim(cols[2]).empty()) lbl = parse_class(cols[2], line);
    out.emplace_back(ref, static_cast<std::size_t>(a), static_cast<std::size_t>(b), lbl);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sessions
// ---------------------------------------------------------------------------

struct Session {
  Recording left;
  Recording right;
  LabelTrack labels_left;
  LabelTrack labels_right;
  std::string session_id;

  const Recording& recording(Wrist w) const { return w == Wrist::left ? left : right; }
  const LabelTrack& labels(Wrist w) const { return w == Wrist::left ? labels_left : labels_right; }
};

namespace detail {
inline void check_labels_fit(const LabelTrack& t, const Recording& r) {
  if (t.end_index() > r.size())
    fail(Errc::out_of_range, "label track extends past recording end");
}
}  // namespace detail

// Trims the earlier-starting recording so both start within one sample
// period, shifts its labels accordingly, and cuts both to the common length.
inline Session align_session(const Recording& left, const Recording& right,
                             const LabelTrack& labels_left, const LabelTrack& labels_right,
                             std::string session_id = {}) {
  const auto& lm = left.meta();
  const auto& rm = right.meta();
  if (lm.wrist != Wrist::left || rm.wrist != Wrist::right)
    fail(Errc::metadata_mismatch, "expected one left and one right recording");
  if (lm.subject_id != rm.subject_id) fail(Errc::metadata_mismatch, "subject_id differs");
  if (lm.scenario != rm.scenario) fail(Errc::metadata_mismatch, "scenario differs");
  if (lm.sample_rate != rm.sample_rate) fail(Errc::metadata_mismatch, "sample rate differs");
  detail::check_labels_fit(labels_left, left);
  detail::check_labels_fit(labels_right, right);

  const double skew = rm.start_time_ms - lm.start_time_ms;
  if (std::abs(skew) >= 1000.0)
    fail(Errc::unsynchronized_pair, "start skew " + text::fmt_ms(skew) + " ms");

  const double period = lm.period_ms();
  const auto trim = static_cast<std::size_t>(std::llround(std::abs(skew) / period));
  std::size_t left_off = 0, right_off = 0;
  (skew > 0 ? left_off : right_off) = trim;

  if (left_off >= left.size() || right_off >= right.size())
    fail(Errc::out_of_range, "alignment trims the whole recording");
  const std::size_t n = std::min(left.size() - left_off, right.size() - right_off);

  auto cut = [n](const Recording& r, std::size_t off) {
    RecordingMeta m = r.meta();
    m.start_time_ms += static_cast<double>(off) * m.period_ms();
    return Recording(r.samples().row_range(off, off + n), std::move(m));
  };
  if (session_id.empty()) session_id = lm.session_id;
  Session s{cut(left, left_off), cut(right, right_off),
            labels_left.shifted_and_clipped(left_off, n),
            labels_right.shifted_and_clipped(right_off, n), session_id};
  return s;
}

}  // namespace arc
