#include <catch2/catch_amalgamated.hpp>

#include <numbers>

#include "arc/preprocess.hpp"
#include "support.hpp"

using namespace arc;
using std::numbers::pi;

namespace {

double max_abs(std::span<const double> v, std::size_t from, std::size_t to) {
  double m = 0.0;
  for (std::size_t i = from; i < to; ++i) m = std::max(m, std::abs(v[i]));
  return m;
}

double wrap(double a) { return std::remainder(a, 2 * pi); }

}  // namespace

TEST_CASE("windowed mean matches a brute-force clipped window") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 60);
    const std::size_t w = 1 + uniform_index(rng, 2 * n);
    std::vector<double> x(n);
    for (auto& v : x) v = uniform(rng, -5, 5);
    const auto got = dsp::windowed_mean(x, w);
    for (std::size_t i = 0; i < n; ++i) {
      const auto start = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(w / 2);
      const auto lo = std::max<std::ptrdiff_t>(0, start);
      const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n), start + static_cast<std::ptrdiff_t>(w));
      double s = 0.0;
      for (auto k = lo; k < hi; ++k) s += x[static_cast<std::size_t>(k)];
      CHECK(got[i] == Catch::Approx(s / static_cast<double>(hi - lo)).epsilon(1e-12).margin(1e-12));
    }
  }
}

TEST_CASE("drift window is odd and centred") {
  CHECK(drift_window_samples({2.0, {}}, 100.0) == 201);
  CHECK(drift_window_samples({1.01, {}}, 100.0) == 101);
}

TEST_CASE("constant channel drifts to zero") {
  const auto rec = test::make_recording(500, [](std::size_t, std::size_t c) { return 0.75 * static_cast<double>(c + 1); });
  const auto out = remove_drift(rec, {});
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(out.samples()(i, c)) < 1e-12);
}

TEST_CASE("ramp interior is removed") {
  const double a = 0.37;
  const auto rec = test::make_recording(1000, [&](std::size_t i, std::size_t) { return a * static_cast<double>(i) / 100.0; });
  const auto out = remove_drift(rec, {});
  const auto col = out.samples().column(0);
  const double scale = a * 10.0;
  CHECK(max_abs(col, 101, 899) < 1e-9 * scale);
}

TEST_CASE("sinusoid on an offset follows the moving-average response") {
  const double fs = 100.0, f = 3.0, amp = 1.5, offset = 4.0;
  const auto rec = test::make_recording(2000, [&](std::size_t i, std::size_t) {
    return offset + amp * std::sin(2 * pi * f * static_cast<double>(i) / fs);
  });
  const auto out = remove_drift(rec, {});
  const auto w = static_cast<double>(drift_window_samples({}, fs));
  // Centred boxcar of odd width w: H(f) = sin(pi f w / fs) / (w sin(pi f / fs)).
  const double h = std::sin(pi * f * w / fs) / (w * std::sin(pi * f / fs));
  const auto col = out.samples().column(0);
  for (std::size_t i = 201; i < 1799; ++i) {
    const double expect = (1.0 - h) * amp * std::sin(2 * pi * f * static_cast<double>(i) / fs);
    CHECK(col[i] == Catch::Approx(expect).margin(1e-9));
  }
  const double got_amp = max_abs(col, 201, 1799);
  CHECK(std::abs(got_amp - amp) < 0.05 * amp);
}

TEST_CASE("drift removal is idempotent for slow drift") {
  // 201-sample window spans exactly 20 periods, so the oscillation has no
  // mean inside any interior window.
  const double period = 201.0 / 20.0;
  const auto rec = test::make_recording(3000, [&](std::size_t i, std::size_t) {
    const double t = static_cast<double>(i);
    return 2.0 * std::sin(2 * pi * t / period) + 0.01 * t / 100.0 + 1.0;
  });
  const auto once = remove_drift(rec, {});
  const auto twice = remove_drift(once, {});
  for (std::size_t i = 402; i < 2598; ++i)
    CHECK(std::abs(twice.samples()(i, 0) - once.samples()(i, 0)) < 1e-6 * 2.0);
}

TEST_CASE("drift removal leaves everything else alone") {
  Rng rng(4);
  const auto rec = test::random_recording(rng, 400, Wrist::left, 77.0);
  const auto out = remove_drift(rec, {});
  CHECK(out.size() == rec.size());
  CHECK(out.meta() == rec.meta());
  for (std::size_t i = 0; i < rec.size(); ++i)
    for (std::size_t c = 3; c < 12; ++c) CHECK(out.samples()(i, c) == rec.samples()(i, c));
}

TEST_CASE("drift window longer than the recording is an error") {
  Rng rng(4);
  const auto rec = test::random_recording(rng, 150, Wrist::left);
  CHECK_THROWS_AS(remove_drift(rec, {}), Error);
  DriftConfig bad;
  bad.highpass_window_s = 0;
  CHECK_THROWS_AS(remove_drift(test::random_recording(rng, 500, Wrist::left), bad), Error);
}

// ---------------------------------------------------------------------------

namespace {

Recording imu(std::size_t n, auto&& fill) {
  return test::make_recording(n, [&](std::size_t i, std::size_t c) { return fill(i, c); });
}

}  // namespace

TEST_CASE("quaternion basics") {
  const auto q = Quaternion::from_euler(0.3, -0.2, 0.9);
  const auto e = q.euler();
  CHECK(e[0] == Catch::Approx(0.3).margin(1e-12));
  CHECK(e[1] == Catch::Approx(-0.2).margin(1e-12));
  CHECK(e[2] == Catch::Approx(0.9).margin(1e-12));
  const auto v = Quaternion::from_axis_angle({0, 0, 1}, pi / 2).rotate({1, 0, 0});
  CHECK(v[0] == Catch::Approx(0).margin(1e-15));
  CHECK(v[1] == Catch::Approx(1));
  CHECK(angular_distance(q, q) == Catch::Approx(0).margin(1e-7));
}

TEST_CASE("stationary device has no linear acceleration") {
  const auto raw = imu(200, [](std::size_t, std::size_t c) {
    if (c == 2) return 9.81;
    if (c == 6) return 22.0;
    if (c == 8) return -40.0;
    return 0.0;
  });
  const auto out = fuse_attitude(raw, {});
  for (std::size_t i = 100; i < 200; ++i)
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(out.samples()(i, c)) < 0.01);
}

TEST_CASE("pure yaw integration at gain zero") {
  FusionConfig cfg;
  cfg.correction_gain = 0.0;
  const double rate = pi / 2;
  SECTION("two seconds advance yaw by pi") {
    const auto raw = imu(201, [&](std::size_t, std::size_t c) { return c == 5 ? rate : (c == 2 ? 9.81 : 0.0); });
    const auto out = fuse_attitude(raw, cfg);
    CHECK(std::abs(wrap(out.samples()(200, kAttYaw) - pi)) < 1e-3);
  }
  SECTION("ten seconds track the analytic angle") {
    const auto raw = imu(1001, [&](std::size_t, std::size_t c) { return c == 5 ? rate : (c == 2 ? 9.81 : 0.0); });
    std::vector<Quaternion> trace;
    const auto out = fuse_attitude(raw, cfg, &trace);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const double expect = rate * static_cast<double>(i) / 100.0;
      CHECK(std::abs(wrap(out.samples()(i, kAttYaw) - expect)) < 1e-3);
      CHECK(std::abs(trace[i].norm() - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("tilt error decays like the scalar complementary filter") {
  FusionConfig cfg;
  cfg.use_magnetometer = false;
  cfg.initial_attitude = {0.0, 0.0, 10.0 * pi / 180.0};
  const auto raw = imu(501, [](std::size_t, std::size_t c) { return c == 2 ? 9.81 : 0.0; });
  std::vector<Quaternion> trace;
  fuse_attitude(raw, cfg, &trace);
  // Oracle: e_{n+1} = (1 - k) e_n, one correction per sample.
  double e = 10.0;
  double prev = 1e9;
  for (const auto& q : trace) {
    e *= 1.0 - cfg.correction_gain;
    const double got = angular_distance(q, Quaternion{}) * 180.0 / pi;
    CHECK(got == Catch::Approx(e).epsilon(1e-9).margin(1e-12));
    CHECK(got <= prev);
    prev = got;
  }
  CHECK(prev < 1.0);
}

TEST_CASE("tilt error with magnetometer still decays below a degree in 5 s") {
  FusionConfig cfg;
  cfg.initial_attitude = {0.05, 0.1, 10.0 * pi / 180.0};
  const auto raw = imu(501, [](std::size_t, std::size_t c) {
    if (c == 2) return 9.81;
    if (c == 6) return 22.0;
    if (c == 8) return -40.0;
    return 0.0;
  });
  std::vector<Quaternion> trace;
  fuse_attitude(raw, cfg, &trace);
  double prev = 1e9;
  for (const auto& q : trace) {
    const double err = angular_distance(q, Quaternion{});
    CHECK(err <= prev + 1e-12);
    prev = err;
    CHECK(std::abs(q.norm() - 1.0) < 1e-9);
  }
  CHECK(prev * 180.0 / pi < 1.0);
}

TEST_CASE("zero accelerometer sample skips the correction") {
  AttitudeFilter f(FusionConfig{});
  CHECK_FALSE(f.correct({0, 0, 0}, nullptr));
  CHECK(f.correct({0, 0, 9.81}, nullptr));
  const auto raw = imu(10, [](std::size_t, std::size_t) { return 0.0; });
  const auto out = fuse_attitude(raw, {});
  CHECK(out.samples()(9, kAttYaw) == 0.0);
}
