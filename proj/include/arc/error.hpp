#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace arc {

enum class Errc {
  malformed_row,
  non_finite,
  timestamp_gap,
  non_monotone_timestamps,
  empty_stream,
  overlapping_intervals,
  unknown_class,
  empty_interval,
  unsynchronized_pair,
  metadata_mismatch,
  out_of_range,
  missing_channel,
  missing_labels,
  dimension_mismatch,
  shape_mismatch,
  insufficient_data,
  single_class,
  invalid_config,
  unknown_key,
  io,
  numeric_failure,
};

// Broad failure categories. The CLI maps them onto its exit codes.
enum class ErrorCategory { config, data, numeric };

inline const char* to_string(Errc e) {
  switch (e) {
    case Errc::malformed_row: return "MalformedRow";
    case Errc::non_finite: return "NonFiniteValue";
    case Errc::timestamp_gap: return "TimestampGap";
    case Errc::non_monotone_timestamps: return "NonMonotoneTimestamps";
    case Errc::empty_stream: return "EmptyStream";
    case Errc::overlapping_intervals: return "OverlappingIntervals";
    case Errc::unknown_class: return "UnknownClass";
    case Errc::empty_interval: return "EmptyInterval";
    case Errc::unsynchronized_pair: return "UnsynchronizedPair";
    case Errc::metadata_mismatch: return "MetadataMismatch";
    case Errc::out_of_range: return "OutOfRange";
    case Errc::missing_channel: return "MissingChannel";
    case Errc::missing_labels: return "MissingLabels";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::insufficient_data: return "InsufficientData";
    case Errc::single_class: return "SingleClass";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::unknown_key: return "UnknownKey";
    case Errc::io: return "IoError";
    case Errc::numeric_failure: return "NumericFailure";
  }
  return "Unknown";
}

inline ErrorCategory category(Errc e) {
  switch (e) {
    case Errc::invalid_config:
    case Errc::unknown_key:
      return ErrorCategory::config;
    case Errc::numeric_failure:
      return ErrorCategory::numeric;
    default:
      return ErrorCategory::data;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, std::size_t line = 0)
      : std::runtime_error(format(code, what, line)), code_(code), line_(line) {}

  Errc code() const noexcept { return code_; }
  /// 1-based line of the offending input, 0 when not line-anchored.
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(Errc code, const std::string& what, std::size_t line) {
    std::string s = to_string(code);
    if (line > 0) s += "(line " + std::to_string(line) + ")";
    if (!what.empty()) s += ": " + what;
    return s;
  }

  Errc code_;
  std::size_t line_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what, std::size_t line = 0) {
  throw Error(code, what, line);
}

inline void require_config(bool ok, const std::string& what) {
  if (!ok) fail(Errc::invalid_config, what);
}

}  // namespace arc
