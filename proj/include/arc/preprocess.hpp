#pragma once

// Drift compensation and the optional raw-IMU attitude fusion path.

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "arc/data_model.hpp"

namespace arc {

namespace dsp {

// Mean over [i - width/2, i - width/2 + width) clipped to the series; an odd
// width gives a window centred exactly on i.
inline std::vector<double> windowed_mean(std::span<const double> x, std::size_t width) {
  const std::size_t n = x.size();
  std::vector<long double> prefix(n + 1, 0.0L);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + static_cast<long double>(x[i]);
  std::vector<double> out(n);
  const auto half = static_cast<std::ptrdiff_t>(width / 2);
  const auto len = static_cast<std::ptrdiff_t>(n);
  for (std::ptrdiff_t i = 0; i < len; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - half);
    const std::ptrdiff_t hi = std::min(len, i - half + static_cast<std::ptrdiff_t>(width));
    out[static_cast<std::size_t>(i)] = static_cast<double>(
        (prefix[static_cast<std::size_t>(hi)] - prefix[static_cast<std::size_t>(lo)]) /
        static_cast<long double>(hi - lo));
  }
  return out;
}

}  // namespace dsp

// ---------------------------------------------------------------------------
// Drift removal
// ---------------------------------------------------------------------------

struct DriftConfig {
  double highpass_window_s = 2.0;
  std::vector<ChannelId> channels = sensor_channels(Sensor::acceleration);
};

// Window width in samples. Even widths are widened by one sample so the
// window is symmetric about the sample it corrects.
inline std::size_t drift_window_samples(const DriftConfig& cfg, double sample_rate) {
  const auto w = static_cast<std::size_t>(std::llround(cfg.highpass_window_s * sample_rate));
  return w % 2 == 0 ? w + 1 : w;
}

// Subtracts a centred moving average from each selected channel. Window
// edges use the truncated window.
inline Recording remove_drift(const Recording& rec, const DriftConfig& cfg) {
  require_config(cfg.highpass_window_s > 0.0, "drift window must be > 0");
  if (cfg.highpass_window_s > rec.duration_s())
    fail(Errc::insufficient_data, "drift window longer than the recording");
  const std::size_t w = drift_window_samples(cfg, rec.sample_rate());
  if (w >= rec.size()) fail(Errc::insufficient_data, "drift window >= recording length");

  Matrix out = rec.samples();
  for (const auto ch : cfg.channels) {
    const auto col = out.column(ch.index());
    const auto mean = dsp::windowed_mean(col, w);
    for (std::size_t r = 0; r < out.rows(); ++r) out(r, ch.index()) = col[r] - mean[r];
  }
  return rec.with_samples(std::move(out));
}

// ---------------------------------------------------------------------------
// Quaternion attitude fusion
// ---------------------------------------------------------------------------

using Vec3 = std::array<double, 3>;

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// Unit quaternion mapping body-frame vectors into the world frame
// (world z points up).
struct Quaternion {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  Quaternion normalized() const {
    const double n = norm();
    return {w / n, x / n, y / n, z / n};
  }

  Quaternion conjugate() const { return {w, -x, -y, -z}; }

  friend Quaternion operator*(const Quaternion& a, const Quaternion& b) {
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
  }

  Vec3 rotate(const Vec3& v) const {
    const Quaternion p{0.0, v[0], v[1], v[2]};
    const Quaternion r = (*this) * p * conjugate();
    return {r.x, r.y, r.z};
  }

  static Quaternion from_axis_angle(const Vec3& unit_axis, double angle) {
    const double s = std::sin(angle / 2);
    return {std::cos(angle / 2), unit_axis[0] * s, unit_axis[1] * s, unit_axis[2] * s};
  }

  // Rotation by the vector omega * dt (exact for constant angular rate).
  static Quaternion from_rotation_vector(const Vec3& rv) {
    const double angle = arc::norm(rv);
    if (angle < 1e-15) return Quaternion{1.0, rv[0] / 2, rv[1] / 2, rv[2] / 2}.normalized();
    return from_axis_angle({rv[0] / angle, rv[1] / angle, rv[2] / angle}, angle);
  }

  // Intrinsic Z-Y-X (yaw, pitch, roll).
  static Quaternion from_euler(double yaw, double pitch, double roll) {
    return from_axis_angle({0, 0, 1}, yaw) * from_axis_angle({0, 1, 0}, pitch) *
           from_axis_angle({1, 0, 0}, roll);
  }

  Vec3 euler() const {
    const double yaw = std::atan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z));
    const double sp = std::clamp(2 * (w * y - z * x), -1.0, 1.0);
    const double roll = std::atan2(2 * (w * x + y * z), 1 - 2 * (x * x + y * y));
    return {yaw, std::asin(sp), roll};
  }
};

// Angle between two attitudes, in radians.
inline double angular_distance(const Quaternion& a, const Quaternion& b) {
  const Quaternion d = a.conjugate() * b;
  return 2.0 * std::atan2(std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z), std::abs(d.w));
}

struct FusionConfig {
  double correction_gain = 0.1;
  double gravity_magnitude = 9.81;
  bool use_magnetometer = true;
  Vec3 initial_attitude = {0.0, 0.0, 0.0};  // yaw, pitch, roll
};

inline void validate(const FusionConfig& cfg) {
  require_config(cfg.correction_gain >= 0.0 && cfg.correction_gain <= 1.0,
                 "fusion correction_gain must be in [0,1]");
  require_config(cfg.gravity_magnitude > 0.0, "fusion gravity_magnitude must be > 0");
}

// Gyro propagation plus a complementary correction toward the measured
// gravity (and optionally magnetic north along world +x).
class AttitudeFilter {
 public:
  explicit AttitudeFilter(FusionConfig cfg) : cfg_(cfg) {
    validate(cfg_);
    q_ = Quaternion::from_euler(cfg_.initial_attitude[0], cfg_.initial_attitude[1],
                                cfg_.initial_attitude[2]);
  }

  void propagate(const Vec3& gyro, double dt) {
    q_ = (q_ * Quaternion::from_rotation_vector({gyro[0] * dt, gyro[1] * dt, gyro[2] * dt}))
             .normalized();
  }

  // Returns false when the accelerometer sample carries no direction.
  bool correct(const Vec3& accel, const Vec3* mag) {
    const double an = norm(accel);
    if (an < 1e-12) return false;
    const Vec3 a{accel[0] / an, accel[1] / an, accel[2] / an};
    const Vec3 g = gravity_direction_body();
    const Vec3 axis = cross(a, g);
    const double s = norm(axis);
    if (s > 1e-15) {
      const double angle = std::atan2(s, dot(a, g));
      q_ = (q_ * Quaternion::from_axis_angle({axis[0] / s, axis[1] / s, axis[2] / s},
                                             cfg_.correction_gain * angle))
               .normalized();
    }
    if (mag != nullptr && cfg_.use_magnetometer) {
      const Vec3 mw = q_.rotate(*mag);
      if (std::hypot(mw[0], mw[1]) > 1e-12) {
        const double heading = std::atan2(mw[1], mw[0]);
        q_ = (Quaternion::from_axis_angle({0, 0, 1}, -cfg_.correction_gain * heading) * q_)
                 .normalized();
      }
    }
    return true;
  }

  // World up expressed in body coordinates.
  Vec3 gravity_direction_body() const { return q_.conjugate().rotate({0.0, 0.0, 1.0}); }

  Vec3 linear_acceleration(const Vec3& accel) const {
    const Vec3 g = gravity_direction_body();
    const double m = cfg_.gravity_magnitude;
    return {accel[0] - m * g[0], accel[1] - m * g[1], accel[2] - m * g[2]};
  }

  const Quaternion& attitude() const noexcept { return q_; }

 private:
  FusionConfig cfg_;
  Quaternion q_;
};

// Replaces the attitude channels with fused yaw/pitch/roll and the
// acceleration channels with gravity-free linear acceleration. Input
// acceleration is the raw accelerometer reading (specific force).
inline Recording fuse_attitude(const Recording& raw, const FusionConfig& cfg,
                               std::vector<Quaternion>* trace = nullptr) {
  AttitudeFilter filter(cfg);
  const double dt = 1.0 / raw.sample_rate();
  const Matrix& in = raw.samples();
  Matrix out = in;
  if (trace) trace->clear();
  for (std::size_t i = 0; i < in.rows(); ++i) {
    const auto row = in.row(i);
    const Vec3 acc{row[kAccX], row[kAccX + 1], row[kAccX + 2]};
    const Vec3 gyr{row[kGyrX], row[kGyrX + 1], row[kGyrX + 2]};
    const Vec3 mag{row[kMagX], row[kMagX + 1], row[kMagX + 2]};
    if (i > 0) filter.propagate(gyr, dt);
    filter.correct(acc, &mag);
    const Vec3 lin = filter.linear_acceleration(acc);
    const Vec3 eul = filter.attitude().euler();
    for (int k = 0; k < 3; ++k) {
      out(i, kAccX + k) = lin[k];
      out(i, kAttYaw + k) = eul[k];
    }
    if (trace) trace->push_back(filter.attitude());
  }
  return raw.with_samples(std::move(out));
}

}  // namespace arc
