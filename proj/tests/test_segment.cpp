#include <catch2/catch_amalgamated.hpp>

#include "arc/preprocess.hpp"
#include "arc/segment.hpp"
#include "arc/synth.hpp"
#include "support.hpp"

using namespace arc;

namespace {

Recording acc_only(std::vector<double> x) {
  return test::make_recording(x.size(), [&](std::size_t i, std::size_t c) { return c == 0 ? x[i] : 0.0; });
}

void check_sorted_disjoint(const std::vector<Segment>& segs, std::size_t n) {
  for (std::size_t k = 0; k < segs.size(); ++k) {
    CHECK(segs[k].start < segs[k].end);
    CHECK(segs[k].end <= n);
    if (k > 0) CHECK(segs[k - 1].end <= segs[k].start);
  }
}

}  // namespace

TEST_CASE("short-time energy") {
  SECTION("zero acceleration") {
    for (double e : short_time_energy(acc_only(std::vector<double>(300, 0.0)), {})) CHECK(e == 0.0);
  }
  SECTION("constant norm") {
    const auto rec = test::make_recording(300, [](std::size_t, std::size_t c) { return c < 3 ? 1.5 : 7.0; });
    for (double e : short_time_energy(rec, {})) CHECK(e == Catch::Approx(3 * 2.25).epsilon(1e-14));
  }
  SECTION("unit impulse spreads into a plateau of 1/w over w samples") {
    std::vector<double> x(400, 0.0);
    x[200] = 1.0;
    const auto e = short_time_energy(acc_only(x), {});
    const std::size_t w = 50;
    std::size_t plateau = 0;
    for (double v : e) {
      if (v == 0.0) continue;
      CHECK(v == Catch::Approx(1.0 / w).epsilon(1e-12));
      ++plateau;
    }
    CHECK(plateau == w);
  }
}

TEST_CASE("segment_by_rest") {
  SECTION("all-zero recording has no segments") {
    CHECK(segment_by_rest(acc_only(std::vector<double>(1000, 0.0)), {}).empty());
  }
  SECTION("three movements separated by 5 s of zeros") {
    std::vector<double> x(500, 0.0);
    std::vector<std::pair<std::size_t, std::size_t>> planted;
    for (int k = 0; k < 3; ++k) {
      const std::size_t s = x.size();
      for (int i = 0; i < 200; ++i) x.push_back(2.0 * std::sin(3.14159 * i / 200.0));
      planted.emplace_back(s, x.size());
      x.insert(x.end(), 500, 0.0);
    }
    const auto segs = segment_by_rest(acc_only(x), {});
    REQUIRE(segs.size() == 3);
    for (int k = 0; k < 3; ++k) {
      CHECK(segs[k].start <= planted[k].first);
      CHECK(segs[k].end >= planted[k].second);
    }
    check_sorted_disjoint(segs, x.size());
  }
  SECTION("one continuous movement") {
    std::vector<double> x(300, 0.0);
    for (int i = 0; i < 800; ++i) x.push_back(1.0 + 0.5 * std::sin(i * 0.1));
    x.insert(x.end(), 300, 0.0);
    const auto segs = segment_by_rest(acc_only(x), {});
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].start <= 300);
    CHECK(segs[0].end >= 1100);
  }
  SECTION("short pauses inside a movement are not rest") {
    std::vector<double> x(300, 0.0);
    x.insert(x.end(), 100, 1.0);
    x.insert(x.end(), 100, 0.0);  // 1 s pause, below min_rest_s
    x.insert(x.end(), 100, 1.0);
    x.insert(x.end(), 300, 0.0);
    CHECK(segment_by_rest(acc_only(x), {}).size() == 1);
  }
}

TEST_CASE("raising the energy threshold never adds action samples") {
  Rng rng(8);
  std::vector<double> x;
  for (int burst = 0; burst < 12; ++burst) {
    x.insert(x.end(), 100 + uniform_index(rng, 400), 0.0);
    const double a = uniform(rng, 0.05, 2.0);
    for (std::size_t i = 0, n = 50 + uniform_index(rng, 300); i < n; ++i) x.push_back(a * uniform(rng, -1, 1));
  }
  const auto rec = acc_only(x);
  std::size_t prev = x.size() + 1;
  for (double thr : {0.001, 0.005, 0.01, 0.05, 0.1, 0.3, 1.0}) {
    RestConfig cfg;
    cfg.energy_threshold = thr;
    const auto segs = segment_by_rest(rec, cfg);
    check_sorted_disjoint(segs, x.size());
    std::size_t total = 0;
    for (const auto& s : segs) total += s.end - s.start;
    CHECK(total <= prev);
    prev = total;
  }
}

TEST_CASE("rest config validation") {
  RestConfig cfg;
  cfg.min_rest_s = 6.0;
  CHECK_THROWS_AS(segment_by_rest(acc_only(std::vector<double>(100, 0.0)), cfg), Error);
  cfg = {};
  cfg.energy_threshold = 0;
  CHECK_THROWS_AS(short_time_energy(acc_only(std::vector<double>(100, 0.0)), cfg), Error);
}

TEST_CASE("sliding windows") {
  SECTION("1000 samples, W = 300") {
    const auto segs = sliding_windows(acc_only(std::vector<double>(1000, 0.0)), {3.0});
    REQUIRE(segs.size() == 3);
    CHECK(segs[0].start == 0);
    CHECK(segs[0].end == 300);
    CHECK(segs[2].start == 600);
    CHECK(segs[2].end == 900);
  }
  SECTION("T = W") { CHECK(sliding_windows(acc_only(std::vector<double>(300, 0.0)), {3.0}).size() == 1); }
  SECTION("T = W - 1") { CHECK(sliding_windows(acc_only(std::vector<double>(299, 0.0)), {3.0}).empty()); }
  SECTION("coverage is exact for any T and W") {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 1 + uniform_index(rng, 2000);
      const std::size_t w = 1 + uniform_index(rng, 500);
      const auto segs = sliding_windows(acc_only(std::vector<double>(n, 0.0)), {static_cast<double>(w) / 100.0});
      std::vector<int> hits(n, 0);
      for (const auto& s : segs) {
        CHECK(s.end - s.start == w);
        for (std::size_t i = s.start; i < s.end; ++i) ++hits[i];
      }
      const std::size_t covered = w * (n / w);
      for (std::size_t i = 0; i < n; ++i) CHECK(hits[i] == (i < covered ? 1 : 0));
    }
  }
}

TEST_CASE("spot_gesture") {
  auto triangle = [](std::size_t n, std::size_t peak) {
    std::vector<double> x(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = std::abs(static_cast<double>(i) - static_cast<double>(peak));
      x[i] = std::max(0.0, 20.0 - d);
    }
    return acc_only(x);
  };
  SECTION("triangular pulse at 100") {
    const auto s = spot_gesture(triangle(300, 100), Segment("r", 0, 300), {});
    CHECK(s.start == 75);
    CHECK(s.end == 126);
  }
  SECTION("peak near the start is clamped") {
    const auto s = spot_gesture(triangle(300, 3), Segment("r", 0, 300), {});
    CHECK(s.start == 0);
    CHECK(s.end == 29);
  }
  SECTION("ties anchor at the earliest maximum") {
    std::vector<double> x(300, 0.0);
    x[50] = 5.0;
    x[200] = 5.0;
    const auto s = spot_gesture(acc_only(x), Segment("r", 0, 300), {});
    CHECK(s.start == 25);
    CHECK(s.end == 76);
  }
  SECTION("label travels with the segment") {
    const auto s = spot_gesture(triangle(300, 100), Segment("r", 0, 300, MovementClass::M2), {});
    CHECK(s.label == MovementClass::M2);
  }
  SECTION("single channel peak series") {
    SpotConfig cfg;
    cfg.peak_channel = ChannelId::from_index(0);
    std::vector<double> x(300, 0.0);
    x[40] = -9.0;  // larger norm, smaller signed value
    x[120] = 3.0;
    const auto rec = acc_only(x);
    CHECK(spot_gesture(rec, Segment("r", 0, 300), cfg).start == 95);
    CHECK(spot_gesture(rec, Segment("r", 0, 300), {}).start == 15);
  }
}

TEST_CASE("spotted region contains the argmax and fits the margins") {
  Rng rng(13);
  SpotConfig cfg;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> x(400);
    for (auto& v : x) v = uniform(rng, -1, 1);
    const auto rec = acc_only(x);
    const std::size_t a = uniform_index(rng, 399);
    const std::size_t b = a + 1 + uniform_index(rng, 400 - a - 1);
    const Segment seg("r", a, b);
    const auto s = spot_gesture(rec, seg, cfg);
    std::size_t p = a;
    for (std::size_t i = a; i < b; ++i)
      if (std::abs(x[i]) > std::abs(x[p])) p = i;
    CHECK(s.start <= p);
    CHECK(p < s.end);
    CHECK(s.start >= seg.start);
    CHECK(s.end <= seg.end);
    CHECK(s.end - s.start <= 51);
  }
}

TEST_CASE("rest segmentation finds the planted L1 movements") {
  ProtocolConfig cfg;
  cfg.seed = 99;
  const auto synth = synth_session(cfg);
  // The high-pass undershoot around a movement widens the segment slightly.
  auto near = [](std::size_t a, std::size_t b) { return (a > b ? a - b : b - a) <= 100; };
  std::size_t found = 0, total = 0, tight = 0;
  for (Wrist w : {Wrist::left, Wrist::right}) {
    const auto rec = remove_drift(synth.session.recording(w), {});
    const auto segs = segment_by_rest(rec, {});
    for (const auto& p : synth.planted) {
      if (!p.on(w)) continue;
      ++total;
      const std::size_t peak = *p.peak(w);
      for (const auto& s : segs)
        if (s.start <= peak && peak < s.end) {
          ++found;
          tight += near(s.start, p.start) && near(s.end, p.end);
          break;
        }
    }
  }
  CHECK(total == 16);
  CHECK(static_cast<double>(found) >= 0.9 * static_cast<double>(total));
  CHECK(tight == found);
}
