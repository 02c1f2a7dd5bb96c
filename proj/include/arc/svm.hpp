#pragma once

// One-vs-rest linear soft-margin SVM trained by dual coordinate ascent.
//
// Each binary subproblem solves
//
//   max_a  sum_i a_i - 1/2 || sum_i a_i y_i [x_i; 1] ||^2,   0 <= a_i <= C
//
// The bias rides along as a constant feature, so there is no equality
// constraint and single-coordinate steps are exact line maximisations.
// Training stops once every coordinate satisfies the KKT conditions to
// within `tolerance` (projected gradient), verified on the final weights.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <vector>

#include "arc/features.hpp"
#include "arc/rng.hpp"

namespace arc {

struct SvmConfig {
  double c = 1.0;
  double tolerance = 1e-3;
  std::size_t max_epochs = 0;  // 0: 10 * n_samples
  std::uint64_t seed = 0;
};

inline void validate(const SvmConfig& cfg) {
  require_config(cfg.c > 0, "svm.c must be > 0");
  require_config(cfg.tolerance > 0, "svm.tolerance must be > 0");
}

struct BinarySvmResult {
  std::vector<double> w;
  double b = 0.0;
  std::vector<double> alpha;
  std::vector<double> dual_history;  // dual objective after each epoch
  std::size_t epochs = 0;
  bool converged = false;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Projected gradient of the (minimisation-form) dual for coordinate i.
inline double projected_gradient(double g, double alpha, double c) {
  if (alpha <= 0.0) return std::min(g, 0.0);
  if (alpha >= c) return std::max(g, 0.0);
  return g;
}

}  // namespace detail

inline double binary_dual_objective(const BinarySvmResult& r) {
  double s = 0.0;
  for (double a : r.alpha) s += a;
  return s - 0.5 * (detail::dot(r.w, r.w) + r.b * r.b);
}

// x: rows are samples; y: +1 / -1.
inline BinarySvmResult train_binary_svm(const Matrix& x, std::span<const int> y,
                                        const SvmConfig& cfg) {
  validate(cfg);
  const std::size_t n = x.rows(), d = x.cols();
  if (n == 0) fail(Errc::insufficient_data, "empty training set");
  if (y.size() != n) fail(Errc::dimension_mismatch, "labels vs samples");

  BinarySvmResult r;
  r.w.assign(d, 0.0);
  r.alpha.assign(n, 0.0);
  std::vector<double> qii(n);
  for (std::size_t i = 0; i < n; ++i) qii[i] = detail::dot(x.row(i), x.row(i)) + 1.0;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(cfg.seed);
  const std::size_t max_epochs = cfg.max_epochs ? cfg.max_epochs : 10 * n;

  auto gradient = [&](std::size_t i) {
    return y[i] * (detail::dot(r.w, x.row(i)) + r.b) - 1.0;
  };

  for (r.epochs = 0; r.epochs < max_epochs;) {
    shuffle(order, rng);
    double max_pg = 0.0;
    for (std::size_t i : order) {
      const double g = gradient(i);
      const double pg = detail::projected_gradient(g, r.alpha[i], cfg.c);
      max_pg = std::max(max_pg, std::abs(pg));
      if (pg == 0.0) continue;
      const double old = r.alpha[i];
      r.alpha[i] = std::clamp(old - g / qii[i], 0.0, cfg.c);
      const double delta = (r.alpha[i] - old) * y[i];
      if (delta == 0.0) continue;
      const auto xi = x.row(i);
      for (std::size_t k = 0; k < d; ++k) r.w[k] += delta * xi[k];
      r.b += delta;
    }
    ++r.epochs;
    r.dual_history.push_back(binary_dual_objective(r));
    if (max_pg < cfg.tolerance) {
      bool ok = true;
      for (std::size_t i = 0; i < n && ok; ++i)
        ok = std::abs(detail::projected_gradient(gradient(i), r.alpha[i], cfg.c)) < cfg.tolerance;
      if (ok) {
        r.converged = true;
        break;
      }
    }
  }
  return r;
}

class SvmModel {
 public:
  SvmModel() = default;
  SvmModel(std::vector<MovementClass> classes, Matrix weights, std::vector<double> bias,
           Scaler scaler)
      : classes_(std::move(classes)), w_(std::move(weights)), b_(std::move(bias)),
        scaler_(std::move(scaler)) {
    if (w_.rows() != classes_.size() || b_.size() != classes_.size())
      fail(Errc::dimension_mismatch, "one (w, b) per class required");
    if (w_.cols() != scaler_.dim()) fail(Errc::dimension_mismatch, "scaler vs weight dimension");
  }

  const std::vector<MovementClass>& classes() const noexcept { return classes_; }
  const Matrix& weights() const noexcept { return w_; }
  const std::vector<double>& bias() const noexcept { return b_; }
  const Scaler& scaler() const noexcept { return scaler_; }
  std::size_t dim() const noexcept { return w_.cols(); }

  struct Prediction {
    MovementClass cls;
    std::vector<double> scores;
  };

  // Scores on the standardized vector; ties go to the lowest class index.
  Prediction predict(const FeatureVector& v) const {
    const FeatureVector x = scaler_.apply(v);
    Prediction p{classes_.front(), std::vector<double>(classes_.size())};
    std::size_t best = 0;
    for (std::size_t k = 0; k < classes_.size(); ++k) {
      p.scores[k] = detail::dot(w_.row(k), x.values) + b_[k];
      if (p.scores[k] > p.scores[best]) best = k;
    }
    p.cls = classes_[best];
    return p;
  }

  friend bool operator==(const SvmModel&, const SvmModel&) = default;

 private:
  std::vector<MovementClass> classes_;  // ascending class index
  Matrix w_;                            // classes x dim
  std::vector<double> b_;
  Scaler scaler_;
};

inline SvmModel::Prediction predict_svm(const SvmModel& m, const FeatureVector& v) {
  return m.predict(v);
}

// Trains on already standardized vectors; `scaler` is attached to the model
// for inference. Per-class solver diagnostics are written to `reports`.
inline SvmModel train_svm(std::span<const FeatureVector> train, const SvmConfig& cfg,
                          Scaler scaler, std::vector<BinarySvmResult>* reports = nullptr) {
  validate(cfg);
  if (train.empty()) fail(Errc::insufficient_data, "empty training set");
  const std::size_t d = train.front().size();
  std::map<MovementClass, std::size_t> counts;
  for (const auto& v : train) {
    if (!v.label) fail(Errc::missing_labels, "unlabeled training vector");
    if (v.size() != d) fail(Errc::dimension_mismatch, "heterogeneous feature vectors");
    ++counts[*v.label];
  }
  if (counts.size() < 2) fail(Errc::single_class, "need at least two classes");
  if (scaler.dim() == 0) scaler = Scaler::identity(d);

  Matrix x(train.size(), d);
  for (std::size_t i = 0; i < train.size(); ++i)
    std::copy(train[i].values.begin(), train[i].values.end(), x.row(i).begin());

  std::vector<MovementClass> classes;
  for (const auto& [c, _] : counts) classes.push_back(c);
  Matrix w(classes.size(), d);
  std::vector<double> b(classes.size());
  if (reports) reports->clear();
  std::vector<int> y(train.size());
  for (std::size_t k = 0; k < classes.size(); ++k) {
    for (std::size_t i = 0; i < train.size(); ++i) y[i] = *train[i].label == classes[k] ? 1 : -1;
    SvmConfig sub = cfg;
    sub.seed = sub_seed(cfg.seed, static_cast<std::uint64_t>(index_of(classes[k])));
    auto r = train_binary_svm(x, y, sub);
    std::copy(r.w.begin(), r.w.end(), w.row(k).begin());
    b[k] = r.b;
    if (reports) reports->push_back(std::move(r));
  }
  return SvmModel(std::move(classes), std::move(w), std::move(b), std::move(scaler));
}

// Fits the scaler on `train`, standardizes, and trains.
inline SvmModel fit_svm(std::span<const FeatureVector> train, const SvmConfig& cfg,
                        std::vector<BinarySvmResult>* reports = nullptr) {
  Scaler scaler = fit_scaler(train);
  std::vector<FeatureVector> scaled;
  scaled.reserve(train.size());
  for (const auto& v : train) scaled.push_back(scaler.apply(v));
  return train_svm(scaled, cfg, std::move(scaler), reports);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline void write_svm(std::ostream& out, const SvmModel& m) {
  out << "arc_svm,v1," << m.classes().size() << ',' << m.dim() << '\n';
  const auto& s = m.scaler();
  for (std::size_t i = 0; i < s.dim(); ++i)
    out << "scaler," << i << ',' << text::fmt_exact(s.mean()[i]) << ','
        << text::fmt_exact(s.is_constant(i) ? 0.0 : s.stddev()[i]) << '\n';
  for (std::size_t k = 0; k < m.classes().size(); ++k) {
    out << to_string(m.classes()[k]) << ',' << text::fmt_exact(m.bias()[k]);
    for (double v : m.weights().row(k)) out << ',' << text::fmt_exact(v);
    out << '\n';
  }
}

inline SvmModel parse_svm(std::istream& in) {
  std::string raw;
  std::size_t line = 0;
  if (!std::getline(in, raw)) fail(Errc::empty_stream, "empty model file");
  ++line;
  const auto head = text::split(text::trim(raw), ',');
  if (head.size() != 4 || head[0] != "arc_svm" || head[1] != "v1")
    fail(Errc::malformed_row, "not an arc_svm v1 model", line);
  const auto k = static_cast<std::size_t>(text::to_int(head[2], line));
  const auto d = static_cast<std::size_t>(text::to_int(head[3], line));
  std::vector<double> mean, sd, bias;
  std::vector<MovementClass> classes;
  Matrix w(k, d);
  while (std::getline(in, raw)) {
    ++line;
    const auto s = text::trim(raw);
    if (s.empty()) continue;
    const auto cols = text::split(s, ',');
    if (cols[0] == "scaler") {
      if (cols.size() != 4) fail(Errc::malformed_row, "scaler row", line);
      mean.push_back(text::to_double(cols[2], line));
      sd.push_back(text::to_double(cols[3], line));
      continue;
    }
    if (cols.size() != d + 2 || classes.size() >= k) fail(Errc::malformed_row, "weight row", line);
    classes.push_back(parse_class(cols[0], line));
    bias.push_back(text::to_double(cols[1], line));
    for (std::size_t j = 0; j < d; ++j) w(classes.size() - 1, j) = text::to_double(cols[j + 2], line);
  }
  if (classes.size() != k || mean.size() != d) fail(Errc::malformed_row, "truncated model file", line);
  return SvmModel(std::move(classes), std::move(w), std::move(bias),
                  Scaler(std::move(mean), std::move(sd)));
}

}  // namespace arc
