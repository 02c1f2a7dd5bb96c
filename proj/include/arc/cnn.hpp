#pragma once

// Compact 1-D CNN in the EEGNet family:
//
//   input (C x T), per-channel z-scored
//   -> temporal conv, F1 filters of width K (same padding)   -> affine
//   -> depthwise spatial conv, D maps per filter (collapses C) -> affine -> ELU
//   -> average pool (pool1) -> dropout
//   -> separable conv: per-map temporal (width K2) then pointwise to F2 -> affine -> ELU
//   -> average pool (pool2) -> dropout
//   -> dense -> softmax
//
// The temporal and spatial convolutions are both linear with only a
// per-filter affine between them, so they are evaluated in the cheaper order
// (spatial mix first, then the temporal kernel per mixed map). Results match
// the textbook order up to rounding; the straight-loop oracle in the tests
// checks this.

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "arc/data_model.hpp"
#include "arc/rng.hpp"

namespace arc {

struct CnnConfig {
  std::size_t channels = 12;
  std::size_t time_points = 300;
  std::size_t f1 = 8;
  std::size_t depth = 2;
  std::size_t f2 = 16;
  std::size_t temporal_kernel = 50;
  std::size_t separable_kernel = 16;
  std::size_t pool1 = 4;
  std::size_t pool2 = 8;
  double dropout = 0.25;
  std::size_t classes = 2;
  double sample_rate = 100.0;  // 0: temporal_kernel is free
  std::uint64_t seed = 0;

  std::size_t maps() const { return f1 * depth; }
  std::size_t pooled1() const { return pool1 ? time_points / pool1 : 0; }
  std::size_t pooled2() const { return pool2 ? pooled1() / pool2 : 0; }
  std::size_t dense_inputs() const { return f2 * pooled2(); }

  friend bool operator==(const CnnConfig&, const CnnConfig&) = default;
};

inline void validate(const CnnConfig& c) {
  require_config(c.channels >= 1 && c.time_points >= 1, "cnn input shape must be non-empty");
  require_config(c.f1 >= 1 && c.depth >= 1 && c.f2 >= 1, "cnn filter counts must be >= 1");
  require_config(c.temporal_kernel >= 1 && c.separable_kernel >= 1, "cnn kernels must be >= 1");
  require_config(c.pool1 >= 1 && c.pool2 >= 1, "cnn pool widths must be >= 1");
  require_config(c.dropout >= 0 && c.dropout < 1, "cnn dropout must be in [0,1)");
  require_config(c.classes >= 2, "cnn needs at least two classes");
  if (c.sample_rate > 0)
    require_config(c.temporal_kernel == static_cast<std::size_t>(std::llround(c.sample_rate / 2)),
                   "temporal_kernel must equal half the sampling rate");
  require_config(c.pooled1() >= 1 && c.pooled2() >= 1,
                 "time_points " + std::to_string(c.time_points) +
                     " leaves an empty feature map after pooling");
}

struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> v;

  std::size_t size() const { return v.size(); }
  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

enum CnnParam : std::size_t {
  kTemporal,      // F1 x K
  kBn1Scale,      // F1
  kBn1Shift,      // F1
  kDepthwise,     // M x C
  kBn2Scale,      // M
  kBn2Shift,      // M
  kSepDepthwise,  // M x K2
  kSepPointwise,  // F2 x M
  kBn3Scale,      // F2
  kBn3Shift,      // F2
  kDenseW,        // classes x (F2 * T2)
  kDenseB,        // classes
  kCnnParamCount
};

using CnnParams = std::vector<Tensor>;

inline CnnParams zero_params(const CnnConfig& c) {
  const std::size_t m = c.maps();
  auto t = [](std::string n, std::vector<std::size_t> shape) {
    std::size_t sz = 1;
    for (auto s : shape) sz *= s;
    return Tensor{std::move(n), std::move(shape), std::vector<double>(sz, 0.0)};
  };
  return {t("temporal_conv", {c.f1, c.temporal_kernel}),
          t("block1_scale", {c.f1}),
          t("block1_shift", {c.f1}),
          t("depthwise_conv", {m, c.channels}),
          t("block2_scale", {m}),
          t("block2_shift", {m}),
          t("separable_depthwise", {m, c.separable_kernel}),
          t("separable_pointwise", {c.f2, m}),
          t("block3_scale", {c.f2}),
          t("block3_shift", {c.f2}),
          t("dense_weight", {c.classes, c.dense_inputs()}),
          t("dense_bias", {c.classes})};
}

struct CnnModel {
  CnnConfig config;
  CnnParams params;
  // Per-channel input standardization learned from the training windows.
  std::vector<double> input_mean;
  std::vector<double> input_std;
  std::vector<MovementClass> classes;

  friend bool operator==(const CnnModel&, const CnnModel&) = default;
};

// Zero-mean uniform initialisation with limit sqrt(3 / fan_in); affine
// scales start at 1, shifts and the dense bias at 0.
inline CnnModel build_cnn(const CnnConfig& cfg, std::vector<MovementClass> classes = {}) {
  validate(cfg);
  if (classes.empty())
    for (std::size_t k = 0; k < cfg.classes; ++k) classes.push_back(class_from_index(static_cast<int>(k)));
  if (classes.size() != cfg.classes) fail(Errc::invalid_config, "class list size != cnn.classes");

  CnnModel m{cfg, zero_params(cfg), std::vector<double>(cfg.channels, 0.0),
             std::vector<double>(cfg.channels, 1.0), std::move(classes)};
  Rng rng(cfg.seed);
  auto init = [&](CnnParam p, std::size_t fan_in) {
    const double lim = std::sqrt(3.0 / static_cast<double>(fan_in));
    for (auto& x : m.params[p].v) x = uniform(rng, -lim, lim);
  };
  init(kTemporal, cfg.temporal_kernel);
  init(kDepthwise, cfg.channels);
  init(kSepDepthwise, cfg.separable_kernel);
  init(kSepPointwise, cfg.maps());
  init(kDenseW, cfg.dense_inputs());
  for (auto p : {kBn1Scale, kBn2Scale, kBn3Scale}) std::fill(m.params[p].v.begin(), m.params[p].v.end(), 1.0);
  return m;
}

// ---------------------------------------------------------------------------
// Convolution primitives (rows = maps, cols = time, zero "same" padding with
// (K-1)/2 leading samples)
// ---------------------------------------------------------------------------

namespace nn {

inline std::size_t pad_left(std::size_t k) { return (k - 1) / 2; }

// out[m][t] = sum_k w[m][k] * in[m][t + k - pad]
inline Matrix depthwise_conv1d(const Matrix& in, const Matrix& kernels) {
  const std::size_t maps = in.rows(), len = in.cols(), k = kernels.cols();
  const auto pad = static_cast<std::ptrdiff_t>(pad_left(k));
  Matrix out(maps, len);
  for (std::size_t m = 0; m < maps; ++m) {
    const auto x = in.row(m);
    const auto w = kernels.row(m);
    for (std::size_t t = 0; t < len; ++t) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t + j) - pad;
        if (s < 0 || s >= static_cast<std::ptrdiff_t>(len)) continue;
        acc += w[j] * x[static_cast<std::size_t>(s)];
      }
      out(m, t) = acc;
    }
  }
  return out;
}

// Gradients of depthwise_conv1d given d(out).
inline void depthwise_conv1d_backward(const Matrix& in, const Matrix& kernels, const Matrix& dout,
                                      Matrix* din, Matrix& dkernels) {
  const std::size_t maps = in.rows(), len = in.cols(), k = kernels.cols();
  const auto pad = static_cast<std::ptrdiff_t>(pad_left(k));
  if (din) *din = Matrix(maps, len);
  for (std::size_t m = 0; m < maps; ++m) {
    const auto x = in.row(m);
    const auto w = kernels.row(m);
    const auto g = dout.row(m);
    for (std::size_t t = 0; t < len; ++t) {
      const double gt = g[t];
      if (gt == 0.0) continue;
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t + j) - pad;
        if (s < 0 || s >= static_cast<std::ptrdiff_t>(len)) continue;
        const auto si = static_cast<std::size_t>(s);
        dkernels(m, j) += gt * x[si];
        if (din) (*din)(m, si) += gt * w[j];
      }
    }
  }
}

// out[o][t] = sum_i w[o][i] * in[i][t]
inline Matrix pointwise(const Matrix& in, const Matrix& w) {
  Matrix out(w.rows(), in.cols());
  for (std::size_t o = 0; o < w.rows(); ++o)
    for (std::size_t i = 0; i < w.cols(); ++i) {
      const double wi = w(o, i);
      const auto x = in.row(i);
      auto y = out.row(o);
      for (std::size_t t = 0; t < in.cols(); ++t) y[t] += wi * x[t];
    }
  return out;
}

// Full multi-channel convolution; kernels indexed [o][i][k] in a flat
// vector. Reference for the separable factorisation.
inline Matrix conv1d_full(const Matrix& in, std::span<const double> kernels, std::size_t outputs,
                          std::size_t k) {
  const std::size_t inputs = in.rows(), len = in.cols();
  const auto pad = static_cast<std::ptrdiff_t>(pad_left(k));
  Matrix out(outputs, len);
  for (std::size_t o = 0; o < outputs; ++o)
    for (std::size_t t = 0; t < len; ++t) {
      double acc = 0.0;
      for (std::size_t i = 0; i < inputs; ++i)
        for (std::size_t j = 0; j < k; ++j) {
          const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t + j) - pad;
          if (s < 0 || s >= static_cast<std::ptrdiff_t>(len)) continue;
          acc += kernels[(o * inputs + i) * k + j] * in(i, static_cast<std::size_t>(s));
        }
      out(o, t) = acc;
    }
  return out;
}

inline Matrix separable_conv1d(const Matrix& in, const Matrix& depthwise_kernels,
                               const Matrix& pointwise_weights) {
  return pointwise(depthwise_conv1d(in, depthwise_kernels), pointwise_weights);
}

inline Matrix average_pool(const Matrix& in, std::size_t width) {
  const std::size_t out_len = in.cols() / width;
  Matrix out(in.rows(), out_len);
  for (std::size_t m = 0; m < in.rows(); ++m)
    for (std::size_t t = 0; t < out_len; ++t) {
      double s = 0.0;
      for (std::size_t j = 0; j < width; ++j) s += in(m, t * width + j);
      out(m, t) = s / static_cast<double>(width);
    }
  return out;
}

inline double elu(double x) { return x > 0 ? x : std::expm1(x); }
inline double elu_grad(double x) { return x > 0 ? 1.0 : std::exp(x); }

inline std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += (p[i] = std::exp(logits[i] - mx));
  for (auto& v : p) v /= z;
  return p;
}

inline Matrix as_matrix(const Tensor& t) { return Matrix(t.shape[0], t.shape[1], t.v); }

}  // namespace nn

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

namespace detail {

struct CnnCache {
  Matrix xhat;     // C x T
  Matrix mixed;    // M x T, spatial mix of xhat
  Matrix conv1;    // M x T, temporal conv of mixed
  Matrix z2;       // M x T, after block-1 affine folded through the mix
  Matrix y2;       // M x T, pre-activation
  Matrix h2;       // M x T
  Matrix p1;       // M x T1 after dropout
  Matrix mask1;    // M x T1
  Matrix v;        // M x T1, separable depthwise output
  Matrix z3;       // F2 x T1
  Matrix y3;       // F2 x T1
  Matrix mask2;    // F2 x T2
  std::vector<double> flat;
  std::vector<double> probs;
};

inline Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng* rng) {
  Matrix m(rows, cols, 1.0);
  if (rng == nullptr || rate <= 0.0) return m;
  const double keep = 1.0 / (1.0 - rate);
  for (auto& v : m.data()) v = uniform01(*rng) < rate ? 0.0 : keep;
  return m;
}

inline void check_input(const CnnModel& model, const Matrix& x) {
  if (x.rows() != model.config.channels || x.cols() != model.config.time_points)
    fail(Errc::shape_mismatch, "cnn expects " + std::to_string(model.config.channels) + "x" +
                                   std::to_string(model.config.time_points) + " input, got " +
                                   std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
  for (double v : x.data())
    if (!std::isfinite(v)) fail(Errc::non_finite, "cnn input");
}

// `rng` non-null enables dropout.
inline void cnn_forward(const CnnModel& model, const Matrix& x, Rng* rng, CnnCache& c) {
  check_input(model, x);
  const auto& cfg = model.config;
  const auto& P = model.params;
  const std::size_t C = cfg.channels, T = cfg.time_points, M = cfg.maps(), D = cfg.depth;

  c.xhat = Matrix(C, T);
  for (std::size_t ch = 0; ch < C; ++ch)
    for (std::size_t t = 0; t < T; ++t)
      c.xhat(ch, t) = (x(ch, t) - model.input_mean[ch]) / model.input_std[ch];

  c.mixed = nn::pointwise(c.xhat, nn::as_matrix(P[kDepthwise]));
  Matrix temporal(M, cfg.temporal_kernel);
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t k = 0; k < cfg.temporal_kernel; ++k)
      temporal(m, k) = P[kTemporal][(m / D) * cfg.temporal_kernel + k];
  c.conv1 = nn::depthwise_conv1d(c.mixed, temporal);

  c.z2 = Matrix(M, T);
  c.y2 = Matrix(M, T);
  c.h2 = Matrix(M, T);
  for (std::size_t m = 0; m < M; ++m) {
    const std::size_t f = m / D;
    double wsum = 0.0;
    for (std::size_t ch = 0; ch < C; ++ch) wsum += P[kDepthwise][m * C + ch];
    const double bias = P[kBn1Shift][f] * wsum;
    for (std::size_t t = 0; t < T; ++t) {
      const double z = P[kBn1Scale][f] * c.conv1(m, t) + bias;
      const double y = P[kBn2Scale][m] * z + P[kBn2Shift][m];
      c.z2(m, t) = z;
      c.y2(m, t) = y;
      c.h2(m, t) = nn::elu(y);
    }
  }

  c.p1 = nn::average_pool(c.h2, cfg.pool1);
  c.mask1 = dropout_mask(c.p1.rows(), c.p1.cols(), cfg.dropout, rng);
  for (std::size_t i = 0; i < c.p1.data().size(); ++i) c.p1.data()[i] *= c.mask1.data()[i];

  c.v = nn::depthwise_conv1d(c.p1, nn::as_matrix(P[kSepDepthwise]));
  c.z3 = nn::pointwise(c.v, nn::as_matrix(P[kSepPointwise]));
  c.y3 = Matrix(cfg.f2, c.z3.cols());
  Matrix h3(cfg.f2, c.z3.cols());
  for (std::size_t o = 0; o < cfg.f2; ++o)
    for (std::size_t t = 0; t < c.z3.cols(); ++t) {
      c.y3(o, t) = P[kBn3Scale][o] * c.z3(o, t) + P[kBn3Shift][o];
      h3(o, t) = nn::elu(c.y3(o, t));
    }
  Matrix p2 = nn::average_pool(h3, cfg.pool2);
  c.mask2 = dropout_mask(p2.rows(), p2.cols(), cfg.dropout, rng);
  c.flat.assign(p2.data().size(), 0.0);
  for (std::size_t i = 0; i < c.flat.size(); ++i) c.flat[i] = p2.data()[i] * c.mask2.data()[i];

  const std::size_t K = cfg.classes, n_in = c.flat.size();
  std::vector<double> logits(K);
  for (std::size_t k = 0; k < K; ++k) {
    double s = P[kDenseB][k];
    for (std::size_t i = 0; i < n_in; ++i) s += P[kDenseW][k * n_in + i] * c.flat[i];
    logits[k] = s;
  }
  c.probs = nn::softmax(logits);
}

// Accumulates d(loss)/d(params) for one example into `g`, scaled by `weight`.
inline void cnn_backward(const CnnModel& model, const CnnCache& c, std::size_t label,
                         double weight, CnnParams& g) {
  const auto& cfg = model.config;
  const auto& P = model.params;
  const std::size_t C = cfg.channels, T = cfg.time_points, M = cfg.maps(), D = cfg.depth;
  const std::size_t T1 = c.p1.cols(), T2 = cfg.pooled2(), F2 = cfg.f2, K = cfg.classes;
  const std::size_t n_in = c.flat.size();

  std::vector<double> dlogit(K);
  for (std::size_t k = 0; k < K; ++k) dlogit[k] = weight * (c.probs[k] - (k == label ? 1.0 : 0.0));

  std::vector<double> dflat(n_in, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    g[kDenseB][k] += dlogit[k];
    for (std::size_t i = 0; i < n_in; ++i) {
      g[kDenseW][k * n_in + i] += dlogit[k] * c.flat[i];
      dflat[i] += P[kDenseW][k * n_in + i] * dlogit[k];
    }
  }

  // Pool 2 and block-3 affine + ELU.
  Matrix dz3(F2, T1);
  for (std::size_t o = 0; o < F2; ++o)
    for (std::size_t u = 0; u < T2; ++u) {
      const double dp = dflat[o * T2 + u] * c.mask2(o, u) / static_cast<double>(cfg.pool2);
      for (std::size_t j = 0; j < cfg.pool2; ++j) {
        const std::size_t t = u * cfg.pool2 + j;
        const double dy = dp * nn::elu_grad(c.y3(o, t));
        g[kBn3Scale][o] += dy * c.z3(o, t);
        g[kBn3Shift][o] += dy;
        dz3(o, t) = P[kBn3Scale][o] * dy;
      }
    }

  // Pointwise.
  Matrix dv(M, T1);
  for (std::size_t o = 0; o < F2; ++o)
    for (std::size_t m = 0; m < M; ++m) {
      const double w = P[kSepPointwise][o * M + m];
      double acc = 0.0;
      for (std::size_t t = 0; t < T1; ++t) {
        acc += dz3(o, t) * c.v(m, t);
        dv(m, t) += w * dz3(o, t);
      }
      g[kSepPointwise][o * M + m] += acc;
    }

  // Separable depthwise.
  Matrix dp1;
  Matrix dsep(M, cfg.separable_kernel);
  nn::depthwise_conv1d_backward(c.p1, nn::as_matrix(P[kSepDepthwise]), dv, &dp1, dsep);
  for (std::size_t i = 0; i < dsep.data().size(); ++i) g[kSepDepthwise][i] += dsep.data()[i];

  // Dropout 1, pool 1, block-2 affine + ELU, block-1 affine.
  Matrix dconv1(M, T);
  std::vector<double> dwsum(M, 0.0);
  for (std::size_t m = 0; m < M; ++m) {
    const std::size_t f = m / D;
    double sum_dz = 0.0;
    for (std::size_t tau = 0; tau < T1; ++tau) {
      const double dp = dp1(m, tau) * c.mask1(m, tau) / static_cast<double>(cfg.pool1);
      for (std::size_t j = 0; j < cfg.pool1; ++j) {
        const std::size_t t = tau * cfg.pool1 + j;
        const double dy = dp * nn::elu_grad(c.y2(m, t));
        g[kBn2Scale][m] += dy * c.z2(m, t);
        g[kBn2Shift][m] += dy;
        const double dz = P[kBn2Scale][m] * dy;
        sum_dz += dz;
        g[kBn1Scale][f] += dz * c.conv1(m, t);
        dconv1(m, t) = P[kBn1Scale][f] * dz;
      }
    }
    double wsum = 0.0;
    for (std::size_t ch = 0; ch < C; ++ch) wsum += P[kDepthwise][m * C + ch];
    g[kBn1Shift][f] += sum_dz * wsum;
    dwsum[m] = sum_dz * P[kBn1Shift][f];
  }

  // Temporal conv (shared across the D maps of a filter) and the spatial mix.
  Matrix temporal(M, cfg.temporal_kernel);
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t k = 0; k < cfg.temporal_kernel; ++k)
      temporal(m, k) = P[kTemporal][(m / D) * cfg.temporal_kernel + k];
  Matrix dmixed;
  Matrix dtemporal(M, cfg.temporal_kernel);
  nn::depthwise_conv1d_backward(c.mixed, temporal, dconv1, &dmixed, dtemporal);
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t k = 0; k < cfg.temporal_kernel; ++k)
      g[kTemporal][(m / D) * cfg.temporal_kernel + k] += dtemporal(m, k);

  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t ch = 0; ch < C; ++ch) {
      double acc = dwsum[m];
      for (std::size_t t = 0; t < T; ++t) acc += dmixed(m, t) * c.xhat(ch, t);
      g[kDepthwise][m * C + ch] += acc;
    }
}

inline std::size_t class_position(const CnnModel& model, MovementClass cls) {
  const auto it = std::find(model.classes.begin(), model.classes.end(), cls);
  if (it == model.classes.end())
    fail(Errc::out_of_range, "label " + to_string(cls) + " not in the model's class list");
  return static_cast<std::size_t>(it - model.classes.begin());
}

}  // namespace detail

// Class probabilities for a C x T window. Eval mode is deterministic; train
// mode applies dropout drawn from `rng` (a seed-derived stream if null).
inline std::vector<double> forward(const CnnModel& model, const Matrix& window,
                                   bool train_mode = false, Rng* rng = nullptr) {
  detail::CnnCache cache;
  Rng local(sub_seed(model.config.seed, "dropout"));
  Rng* r = train_mode ? (rng ? rng : &local) : nullptr;
  detail::cnn_forward(model, window, r, cache);
  return cache.probs;
}

inline MovementClass predict_cnn(const CnnModel& model, const Matrix& window) {
  const auto p = forward(model, window);
  return model.classes[static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin())];
}

struct LabeledWindow {
  Matrix x;  // C x T
  MovementClass label;
};

inline constexpr double kLogClamp = 1e-12;

struct LossAndGradients {
  double loss = 0.0;
  CnnParams gradients;
};

// Mean cross-entropy over the batch and its analytic gradient. Dropout is
// applied only when `dropout_rng` is given.
inline LossAndGradients loss_and_gradients(const CnnModel& model,
                                           std::span<const LabeledWindow> batch,
                                           Rng* dropout_rng = nullptr) {
  if (batch.empty()) fail(Errc::insufficient_data, "empty batch");
  LossAndGradients out{0.0, zero_params(model.config)};
  const double w = 1.0 / static_cast<double>(batch.size());
  detail::CnnCache cache;
  for (const auto& ex : batch) {
    const std::size_t y = detail::class_position(model, ex.label);
    detail::cnn_forward(model, ex.x, dropout_rng, cache);
    out.loss -= w * std::log(std::max(cache.probs[y], kLogClamp));
    detail::cnn_backward(model, cache, y, w, out.gradients);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct CnnTrainOptions {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  std::size_t patience = 15;
};

struct EpochLog {
  std::size_t epoch;
  double train_loss;
  double val_accuracy;
};

inline double cnn_accuracy(const CnnModel& model, std::span<const LabeledWindow> data) {
  if (data.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& ex : data) ok += predict_cnn(model, ex.x) == ex.label;
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

// Per-channel mean/std over every time point of every window.
inline void fit_input_normalization(CnnModel& model, std::span<const LabeledWindow> train) {
  const std::size_t C = model.config.channels;
  std::vector<double> sum(C, 0.0), sq(C, 0.0);
  double n = 0.0;
  for (const auto& ex : train) {
    for (std::size_t ch = 0; ch < C; ++ch)
      for (double v : ex.x.row(ch)) sum[ch] += v;
    n += static_cast<double>(ex.x.cols());
  }
  for (std::size_t ch = 0; ch < C; ++ch) model.input_mean[ch] = sum[ch] / n;
  for (const auto& ex : train)
    for (std::size_t ch = 0; ch < C; ++ch)
      for (double v : ex.x.row(ch)) sq[ch] += (v - model.input_mean[ch]) * (v - model.input_mean[ch]);
  for (std::size_t ch = 0; ch < C; ++ch) {
    const double sd = std::sqrt(sq[ch] / n);
    model.input_std[ch] = sd > 1e-12 ? sd : 1.0;
  }
}

// Adam minibatch training. Keeps the snapshot with the best validation
// accuracy and stops after `patience` epochs without improvement.
inline CnnModel train_cnn(std::span<const LabeledWindow> train, std::span<const LabeledWindow> val,
                          const CnnConfig& cfg, const CnnTrainOptions& opt,
                          std::vector<MovementClass> classes = {},
                          std::vector<EpochLog>* log = nullptr) {
  if (train.empty() || val.empty()) fail(Errc::insufficient_data, "cnn needs non-empty train and val");
  require_config(opt.batch_size >= 1, "cnn batch_size must be >= 1");
  require_config(opt.learning_rate >= 0, "cnn learning_rate must be >= 0");
  for (const auto* split : {&train, &val})
    for (const auto& ex : *split)
      if (ex.x.rows() != cfg.channels || ex.x.cols() != cfg.time_points)
        fail(Errc::shape_mismatch, "heterogeneous window shapes");

  CnnModel model = build_cnn(cfg, std::move(classes));
  fit_input_normalization(model, train);

  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  CnnParams m1 = zero_params(cfg), m2 = zero_params(cfg);
  Rng shuffle_rng(sub_seed(cfg.seed, "shuffle"));
  Rng dropout_rng(sub_seed(cfg.seed, "dropout"));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  CnnModel best = model;
  double best_acc = -1.0;
  std::size_t since_best = 0;
  std::size_t step = 0;
  std::vector<LabeledWindow> batch;
  if (log) log->clear();

  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t first = 0; first < order.size(); first += opt.batch_size) {
      const std::size_t last = std::min(order.size(), first + opt.batch_size);
      batch.clear();
      for (std::size_t i = first; i < last; ++i) batch.push_back(train[order[i]]);
      const auto lg = loss_and_gradients(model, batch, cfg.dropout > 0 ? &dropout_rng : nullptr);
      loss_sum += lg.loss * static_cast<double>(batch.size());
      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t p = 0; p < kCnnParamCount; ++p)
        for (std::size_t i = 0; i < model.params[p].size(); ++i) {
          const double gi = lg.gradients[p][i];
          m1[p][i] = beta1 * m1[p][i] + (1 - beta1) * gi;
          m2[p][i] = beta2 * m2[p][i] + (1 - beta2) * gi * gi;
          model.params[p][i] -= opt.learning_rate * (m1[p][i] / c1) / (std::sqrt(m2[p][i] / c2) + eps);
        }
    }
    for (const auto& t : model.params)
      for (double v : t.v)
        if (!std::isfinite(v)) fail(Errc::numeric_failure, "cnn parameters diverged");
    const double acc = cnn_accuracy(model, val);
    if (log) log->push_back({epoch, loss_sum / static_cast<double>(train.size()), acc});
    if (acc > best_acc) {
      best_acc = acc;
      best = model;
      since_best = 0;
    } else if (++since_best >= opt.patience) {
      break;
    }
  }
  return best;
}

inline void write_training_log(std::ostream& out, std::span<const EpochLog> log) {
  out << "epoch,train_loss,val_acc\n";
  for (const auto& e : log)
    out << e.epoch << ',' << text::fmt_exact(e.train_loss) << ',' << text::fmt_exact(e.val_accuracy)
        << '\n';
}

// ---------------------------------------------------------------------------
// Serialization: named tensors with shape headers
// ---------------------------------------------------------------------------

inline void write_cnn(std::ostream& out, const CnnModel& m) {
  const auto& c = m.config;
  out << "arc_cnn,v1\n";
  out << "config,channels," << c.channels << "\nconfig,time_points," << c.time_points
      << "\nconfig,f1," << c.f1 << "\nconfig,depth," << c.depth << "\nconfig,f2," << c.f2
      << "\nconfig,temporal_kernel," << c.temporal_kernel << "\nconfig,separable_kernel,"
      << c.separable_kernel << "\nconfig,pool1," << c.pool1 << "\nconfig,pool2," << c.pool2
      << "\nconfig,dropout," << text::fmt_exact(c.dropout) << "\nconfig,classes," << c.classes
      << "\nconfig,sample_rate," << text::fmt_exact(c.sample_rate) << "\nconfig,seed," << c.seed
      << '\n';
  out << "classes";
  for (auto cls : m.classes) out << ',' << to_string(cls);
  out << '\n';
  auto tensor = [&out](const std::string& name, std::span<const std::size_t> shape,
                       std::span<const double> v) {
    out << "tensor," << name;
    for (auto s : shape) out << ',' << s;
    out << '\n';
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << text::fmt_exact(v[i]);
    out << '\n';
  };
  const std::size_t cs[] = {c.channels};
  tensor("input_mean", cs, m.input_mean);
  tensor("input_std", cs, m.input_std);
  for (const auto& t : m.params) tensor(t.name, t.shape, t.v);
}

inline CnnModel parse_cnn(std::istream& in) {
  std::string raw;
  std::size_t line = 0;
  auto next = [&]() -> std::string_view {
    while (std::getline(in, raw)) {
      ++line;
      if (!text::trim(raw).empty()) return text::trim(raw);
    }
    return {};
  };
  if (next() != "arc_cnn,v1") fail(Errc::malformed_row, "not an arc_cnn v1 model", line);
  CnnConfig c;
  std::vector<MovementClass> classes;
  std::string_view s;
  for (s = next(); s.starts_with("config,"); s = next()) {
    const auto cols = text::split(s, ',');
    if (cols.size() != 3) fail(Errc::malformed_row, "config row", line);
    const auto key = cols[1];
    auto as_size = [&] { return static_cast<std::size_t>(text::to_int(cols[2], line)); };
    if (key == "channels") c.channels = as_size();
    else if (key == "time_points") c.time_points = as_size();
    else if (key == "f1") c.f1 = as_size();
    else if (key == "depth") c.depth = as_size();
    else if (key == "f2") c.f2 = as_size();
    else if (key == "temporal_kernel") c.temporal_kernel = as_size();
    else if (key == "separable_kernel") c.separable_kernel = as_size();
    else if (key == "pool1") c.pool1 = as_size();
    else if (key == "pool2") c.pool2 = as_size();
    else if (key == "dropout") c.dropout = text::to_double(cols[2], line);
    else if (key == "classes") c.classes = as_size();
    else if (key == "sample_rate") c.sample_rate = text::to_double(cols[2], line);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(text::to_int(cols[2], line));
    else fail(Errc::malformed_row, "unknown config key", line);
  }
  if (!s.starts_with("classes")) fail(Errc::malformed_row, "expected classes row", line);
  const auto cls_cols = text::split(s, ',');
  for (std::size_t i = 1; i < cls_cols.size(); ++i) classes.push_back(parse_class(cls_cols[i], line));

  CnnModel m = build_cnn(c, classes);
  auto read_tensor = [&](const std::string& name, std::vector<double>& dst) {
    const std::string head(next());
    const auto cols = text::split(head, ',');
    if (cols.size() < 2 || cols[0] != "tensor" || cols[1] != name)
      fail(Errc::malformed_row, "expected tensor " + name, line);
    const auto vals = text::split(next(), ',');
    if (vals.size() != dst.size()) fail(Errc::shape_mismatch, "tensor " + name + " size", line);
    for (std::size_t i = 0; i < vals.size(); ++i) dst[i] = text::to_double(vals[i], line);
  };
  read_tensor("input_mean", m.input_mean);
  read_tensor("input_std", m.input_std);
  for (auto& t : m.params) read_tensor(t.name, t.v);
  return m;
}

}  // namespace arc
