#pragma once

// Per-channel mean/min/max/std features and train-set standardization.

#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "arc/data_model.hpp"

namespace arc {

inline constexpr std::size_t kStatsPerChannel = 4;
inline constexpr std::array<std::string_view, kStatsPerChannel> kStatNames = {"mean", "min", "max",
                                                                              "std"};

struct FeatureVector {
  std::vector<double> values;
  std::optional<MovementClass> label;

  std::size_t size() const noexcept { return values.size(); }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Channels fed to the feature extractor, in canonical order.
struct ChannelSelection {
  std::vector<ChannelId> channels = all_channels();

  // The nine channels listed for the SVM: acceleration, rotation rate and
  // the three attitude angles.
  static ChannelSelection svm_nine() {
    ChannelSelection s;
    s.channels.clear();
    for (auto sensor : {Sensor::acceleration, Sensor::rotation_rate, Sensor::attitude})
      for (auto c : sensor_channels(sensor)) s.channels.push_back(c);
    return s;
  }

  Matrix select(const Matrix& m) const {
    Matrix out(m.rows(), channels.size());
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t k = 0; k < channels.size(); ++k) out(r, k) = m(r, channels[k].index());
    return out;
  }
};

// Per column of the window: (mean, min, max, population std).
inline FeatureVector extract_features(const Matrix& window) {
  if (window.rows() == 0 || window.cols() == 0) fail(Errc::insufficient_data, "empty window");
  const std::size_t n = window.rows(), k = window.cols();
  FeatureVector fv;
  fv.values.resize(kStatsPerChannel * k);
  std::vector<double> sum(k, 0.0), lo(k), hi(k);
  for (std::size_t c = 0; c < k; ++c) lo[c] = hi[c] = window(0, c);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = window.row(r);
    for (std::size_t c = 0; c < k; ++c) {
      sum[c] += row[c];
      lo[c] = std::min(lo[c], row[c]);
      hi[c] = std::max(hi[c], row[c]);
    }
  }
  std::vector<double> mean(k), ss(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) mean[c] = sum[c] / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = window.row(r);
    for (std::size_t c = 0; c < k; ++c) {
      const double d = row[c] - mean[c];
      ss[c] += d * d;
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    // Rounding can push the mean a hair outside [min, max] for constant data.
    const double m = std::clamp(mean[c], lo[c], hi[c]);
    fv.values[kStatsPerChannel * c + 0] = m;
    fv.values[kStatsPerChannel * c + 1] = lo[c];
    fv.values[kStatsPerChannel * c + 2] = hi[c];
    fv.values[kStatsPerChannel * c + 3] = std::sqrt(ss[c] / static_cast<double>(n));
  }
  return fv;
}

inline std::vector<std::string> feature_names(const ChannelSelection& sel) {
  std::vector<std::string> out;
  for (auto ch : sel.channels)
    for (auto stat : kStatNames) out.push_back(std::string(channel_name(ch)) + "_" + std::string(stat));
  return out;
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

class Scaler {
 public:
  Scaler() = default;
  Scaler(std::vector<double> mean, std::vector<double> stddev) : mean_(std::move(mean)) {
    if (stddev.size() != mean_.size()) fail(Errc::dimension_mismatch, "scaler mean/std sizes");
    std_.resize(stddev.size());
    zero_.resize(stddev.size());
    for (std::size_t i = 0; i < stddev.size(); ++i) {
      zero_[i] = !(stddev[i] > 0.0);
      std_[i] = zero_[i] ? 1.0 : stddev[i];
    }
  }

  static Scaler identity(std::size_t dim) {
    return Scaler(std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0));
  }

  std::size_t dim() const noexcept { return mean_.size(); }
  const std::vector<double>& mean() const noexcept { return mean_; }
  // Zero-variance dimensions report 1 here and are flagged by is_constant().
  const std::vector<double>& stddev() const noexcept { return std_; }
  bool is_constant(std::size_t i) const { return zero_[i]; }

  FeatureVector apply(const FeatureVector& v) const {
    if (v.size() != dim())
      fail(Errc::dimension_mismatch,
           "feature dimension " + std::to_string(v.size()) + " vs scaler " + std::to_string(dim()));
    FeatureVector out{std::vector<double>(dim()), v.label};
    for (std::size_t i = 0; i < dim(); ++i)
      out.values[i] = zero_[i] ? 0.0 : (v.values[i] - mean_[i]) / std_[i];
    return out;
  }

  friend bool operator==(const Scaler&, const Scaler&) = default;

 private:
  std::vector<double> mean_;
  std::vector<double> std_;
  std::vector<bool> zero_;
};

inline Scaler fit_scaler(std::span<const FeatureVector> train) {
  if (train.size() < 2) fail(Errc::insufficient_data, "scaler needs at least 2 vectors");
  const std::size_t d = train.front().size();
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (const auto& v : train) {
    if (v.size() != d) fail(Errc::dimension_mismatch, "heterogeneous feature vectors");
    for (std::size_t i = 0; i < d; ++i) mean[i] += v.values[i];
  }
  const auto n = static_cast<double>(train.size());
  for (auto& m : mean) m /= n;
  for (const auto& v : train)
    for (std::size_t i = 0; i < d; ++i) var[i] += (v.values[i] - mean[i]) * (v.values[i] - mean[i]);
  std::vector<double> sd(d);
  for (std::size_t i = 0; i < d; ++i) {
    sd[i] = std::sqrt(var[i] / n);
    // Spread indistinguishable from rounding noise counts as constant.
    if (sd[i] <= 1e-12 * std::max(1.0, std::abs(mean[i]))) sd[i] = 0.0;
  }
  return Scaler(std::move(mean), std::move(sd));
}

inline FeatureVector apply_scaler(const Scaler& s, const FeatureVector& v) { return s.apply(v); }

inline void write_scaler(std::ostream& out, const Scaler& s) {
  out << "dim,mean,std\n";
  for (std::size_t i = 0; i < s.dim(); ++i)
    out << i << ',' << text::fmt_exact(s.mean()[i]) << ','
        << text::fmt_exact(s.is_constant(i) ? 0.0 : s.stddev()[i]) << '\n';
}

inline Scaler parse_scaler(std::istream& in) {
  std::vector<double> mean, sd;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto s = text::trim(raw);
    if (s.empty() || s == "dim,mean,std") continue;
    const auto cols = text::split(s, ',');
    if (cols.size() != 3) fail(Errc::malformed_row, "scaler row", line);
    if (static_cast<std::size_t>(text::to_int(cols[0], line)) != mean.size())
      fail(Errc::malformed_row, "scaler dims out of order", line);
    mean.push_back(text::to_double(cols[1], line));
    sd.push_back(text::to_double(cols[2], line));
  }
  return Scaler(std::move(mean), std::move(sd));
}

// Feature matrix CSV: named dimensions followed by the label column.
inline void write_feature_matrix(std::ostream& out, const ChannelSelection& sel,
                                 std::span<const FeatureVector> rows) {
  const auto names = feature_names(sel);
  for (const auto& n : names) out << n << ',';
  out << "label\n";
  for (const auto& fv : rows) {
    if (fv.size() != names.size()) fail(Errc::dimension_mismatch, "feature row width");
    for (double v : fv.values) out << text::fmt_exact(v) << ',';
    out << (fv.label ? to_string(*fv.label) : "") << '\n';
  }
}

}  // namespace arc
