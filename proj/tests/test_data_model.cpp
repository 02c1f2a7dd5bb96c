#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "arc/data_model.hpp"
#include "arc/rng.hpp"
#include "support.hpp"

using namespace arc;

namespace {

Errc error_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::io;
}

std::size_t error_line(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.line();
  }
  return 0;
}

std::string row(double t) {
  std::ostringstream s;
  s << t;
  for (int c = 0; c < 12; ++c) s << ',' << c * 0.5;
  return s.str() + "\n";
}

}  // namespace

TEST_CASE("movement classes partition into four kinds") {
  int targets = 0, non_targets = 0, rest = 0, null = 0;
  for (int i = 0; i < kMovementClassCount; ++i) {
    const auto c = class_from_index(i);
    switch (kind_of(c)) {
      case ClassKind::target: ++targets; break;
      case ClassKind::non_target: ++non_targets; break;
      case ClassKind::rest: ++rest; break;
      case ClassKind::null: ++null; break;
    }
    CHECK(parse_class(to_string(c)) == c);
  }
  CHECK(targets == 4);
  CHECK(non_targets == 19);
  CHECK(rest == 1);
  CHECK(null == 1);
  CHECK(to_string(MovementClass::R19) == "R19");
  CHECK(error_of([] { parse_class("M5"); }) == Errc::unknown_class);
}

TEST_CASE("twelve channels in canonical order") {
  const auto all = all_channels();
  REQUIRE(all.size() == 12);
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(all[i].index() == i);
    CHECK(try_parse_channel(channel_name(all[i]))->index() == i);
  }
  CHECK(channel_name(all[0]) == "acc_x");
  CHECK(channel_name(all[kGyrX]) == "gyr_x");
  CHECK(channel_name(all[kMagX]) == "mag_x");
  CHECK(channel_name(all[kAttYaw]) == "att_yaw");
  CHECK(channel_name(all[11]) == "att_roll");
}

TEST_CASE("parse_recording reads a well-formed stream") {
  std::istringstream in(std::string(kRecordingHeader) + "\n" + row(0) + row(10) + row(20));
  const auto rec = parse_recording(in, test::meta(Wrist::left));
  CHECK(rec.size() == 3);
  CHECK(rec.samples()(2, 11) == 5.5);
  CHECK(rec.meta().start_time_ms == 0.0);
}

TEST_CASE("parse_recording rejects malformed input") {
  SECTION("twelve columns") {
    std::istringstream in(row(0) + "10,1,2,3,4,5,6,7,8,9,10,11,12\n" + "20,1,2,3,4,5,6,7,8,9,10,11\n");
    auto f = [&] { parse_recording(in, test::meta(Wrist::left)); };
    CHECK(error_of(f) == Errc::malformed_row);
    std::istringstream again(row(0) + row(10) + "20,1,2,3,4,5,6,7,8,9,10,11\n");
    CHECK(error_line([&] { parse_recording(again, test::meta(Wrist::left)); }) == 3);
  }
  SECTION("timestamp gap of 30 ms at 100 Hz") {
    std::istringstream in(row(0) + row(10) + row(40));
    CHECK(error_of([&] { parse_recording(in, test::meta(Wrist::left)); }) == Errc::timestamp_gap);
  }
  SECTION("a 15 ms step is still within 1.5 periods") {
    std::istringstream in(row(0) + row(15));
    CHECK(parse_recording(in, test::meta(Wrist::left)).size() == 2);
  }
  SECTION("non-monotone") {
    std::istringstream in(row(0) + row(10) + row(10));
    CHECK(error_of([&] { parse_recording(in, test::meta(Wrist::left)); }) ==
          Errc::non_monotone_timestamps);
  }
  SECTION("non-finite value") {
    std::istringstream in(row(0) + "10,nan,0,0,0,0,0,0,0,0,0,0,0\n");
    CHECK(error_of([&] { parse_recording(in, test::meta(Wrist::left)); }) == Errc::non_finite);
  }
  SECTION("empty") {
    std::istringstream in(std::string(kRecordingHeader) + "\n");
    CHECK(error_of([&] { parse_recording(in, test::meta(Wrist::left)); }) == Errc::empty_stream);
  }
}

TEST_CASE("recording round trip keeps values to 6 decimals") {
  Rng rng(11);
  const Recording rec = test::random_recording(rng, 50, Wrist::right, 1234.0);
  std::stringstream s;
  write_recording(s, rec);
  const auto back = parse_recording(s, rec.meta());
  REQUIRE(back.size() == rec.size());
  for (std::size_t i = 0; i < rec.samples().data().size(); ++i)
    CHECK(std::abs(back.samples().data()[i] - rec.samples().data()[i]) < 1e-6);
  CHECK(back.meta().start_time_ms == 1234.0);
}

TEST_CASE("metadata sidecar") {
  std::istringstream in("subject_id=S01\nwrist=left\nscenario=L2\npopulation=patient\nsample_rate_hz=50\n");
  const auto m = parse_metadata(in);
  CHECK(m.subject_id == "S01");
  CHECK(m.wrist == Wrist::left);
  CHECK(m.scenario == Scenario::L2);
  CHECK(m.population == Population::patient);
  CHECK(m.sample_rate == 50.0);
  std::stringstream out;
  write_metadata(out, m);
  CHECK(parse_metadata(out) == m);

  std::istringstream missing("subject_id=S01\nwrist=left\n");
  CHECK(error_of([&] { parse_metadata(missing); }) == Errc::invalid_config);
  std::istringstream unknown("subject_id=S01\nwrist=left\nscenario=L1\npopulation=healthy\nsample_rate_hz=100\ncolour=red\n");
  CHECK(error_of([&] { parse_metadata(unknown); }) == Errc::unknown_key);
}

TEST_CASE("parse_labels converts and validates") {
  SECTION("ms to index") {
    std::istringstream in("0,500,M1\n");
    const auto t = parse_labels(in);
    REQUIRE(t.intervals().size() == 1);
    CHECK(t.intervals()[0] == LabelInterval{0, 50, MovementClass::M1});
  }
  SECTION("overlap rejected") {
    std::istringstream in("0,500,M1\n400,900,M2\n");
    CHECK(error_of([&] { parse_labels(in); }) == Errc::overlapping_intervals);
  }
  SECTION("touching same class merged") {
    std::istringstream in("start_ms,end_ms,class\n0,500,Rest\n500,1000,Rest\n");
    const auto t = parse_labels(in);
    REQUIRE(t.intervals().size() == 1);
    CHECK(t.intervals()[0] == LabelInterval{0, 100, MovementClass::Rest});
  }
  SECTION("end <= start") {
    std::istringstream in("500,500,M1\n");
    CHECK(error_of([&] { parse_labels(in); }) == Errc::empty_interval);
  }
  SECTION("unknown tag") {
    std::istringstream in("0,10,X9\n");
    CHECK(error_of([&] { parse_labels(in); }) == Errc::unknown_class);
  }
  SECTION("half-sample ties go to the earlier sample") {
    CHECK(ms_to_index(5.0, 100) == 0);
    CHECK(ms_to_index(15.0, 100) == 1);
    CHECK(ms_to_index(15.1, 100) == 2);
    CHECK(ms_to_index(14.9, 100) == 1);
  }
}

TEST_CASE("label round trip is the identity on valid tracks") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<LabelInterval> iv;
    std::size_t t = uniform_index(rng, 20);
    for (int k = 0; k < 8; ++k) {
      const std::size_t len = 1 + uniform_index(rng, 30);
      iv.push_back({t, t + len, class_from_index(static_cast<int>(uniform_index(rng, kMovementClassCount)))});
      t += len + uniform_index(rng, 3);
    }
    const LabelTrack track(iv);
    std::stringstream s;
    write_labels(s, track);
    CHECK(parse_labels(s) == track);
  }
}

TEST_CASE("label tracks stay sorted, disjoint and merged") {
  const LabelTrack t({{20, 30, MovementClass::M2}, {0, 10, MovementClass::M1}, {10, 20, MovementClass::M1}});
  REQUIRE(t.intervals().size() == 2);
  CHECK(t.intervals()[0] == LabelInterval{0, 20, MovementClass::M1});
  CHECK(t.intervals()[1] == LabelInterval{20, 30, MovementClass::M2});
}

TEST_CASE("segments and slicing") {
  Rng rng(3);
  const auto rec = test::random_recording(rng, 6, Wrist::left);
  CHECK(error_of([] { Segment("r", 5, 5); }) == Errc::out_of_range);
  const auto whole = slice(rec, Segment("r", 0, 6));
  CHECK(whole == rec.samples());
  const auto part = slice(rec, Segment("r", 2, 4));
  REQUIRE(part.rows() == 2);
  for (std::size_t c = 0; c < 12; ++c) {
    CHECK(part(0, c) == rec.samples()(2, c));
    CHECK(part(1, c) == rec.samples()(3, c));
  }
  CHECK(error_of([&] { slice(rec, Segment("r", 4, 7)); }) == Errc::out_of_range);

  std::vector<Segment> segs{Segment("r", 0, 3, MovementClass::M3), Segment("r", 3, 6)};
  std::stringstream s;
  write_segments(s, segs);
  const auto back = parse_segments(s, "r");
  REQUIRE(back.size() == 2);
  CHECK(back[0].label == MovementClass::M3);
  CHECK(!back[1].label);
  CHECK(back[1].end == 6);
}

TEST_CASE("align_session trims the earlier recording") {
  Rng rng(9);
  SECTION("identical start times") {
    const auto l = test::random_recording(rng, 40, Wrist::left, 1000);
    const auto r = test::random_recording(rng, 40, Wrist::right, 1000);
    const LabelTrack lt({{5, 10, MovementClass::M1}});
    const auto s = align_session(l, r, lt, {});
    CHECK(s.left == l);
    CHECK(s.right == r);
    CHECK(s.labels_left == lt);
  }
  SECTION("right starts 20 ms later") {
    const auto l = test::random_recording(rng, 40, Wrist::left, 1000);
    const auto r = test::random_recording(rng, 40, Wrist::right, 1020);
    const auto s = align_session(l, r, LabelTrack({{5, 10, MovementClass::M1}}), {});
    CHECK(s.left.size() == 38);
    CHECK(s.right.size() == 38);
    CHECK(s.left.samples()(0, 0) == l.samples()(2, 0));
    CHECK(s.labels_left.intervals()[0] == LabelInterval{3, 8, MovementClass::M1});
    CHECK(std::abs(s.left.meta().start_time_ms - s.right.meta().start_time_ms) < 10.0);
    const auto again = align_session(s.left, s.right, s.labels_left, s.labels_right);
    CHECK(again.left == s.left);
    CHECK(again.right == s.right);
    CHECK(again.labels_left == s.labels_left);
  }
  SECTION("skew of 1200 ms") {
    const auto l = test::random_recording(rng, 400, Wrist::left, 0);
    const auto r = test::random_recording(rng, 400, Wrist::right, 1200);
    CHECK(error_of([&] { align_session(l, r, {}, {}); }) == Errc::unsynchronized_pair);
  }
  SECTION("subject mismatch") {
    const auto l = test::random_recording(rng, 40, Wrist::left, 0);
    auto meta = test::meta(Wrist::right);
    meta.subject_id = "other";
    const Recording r(l.samples(), meta);
    CHECK(error_of([&] { align_session(l, r, {}, {}); }) == Errc::metadata_mismatch);
  }
}

TEST_CASE("alignment gives equal lengths for any skew below a second") {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const double skew = uniform(rng, -990.0, 990.0);
    const auto l = test::random_recording(rng, 150 + uniform_index(rng, 50), Wrist::left, 5000.0);
    const auto r = test::random_recording(rng, 150 + uniform_index(rng, 50), Wrist::right, 5000.0 + skew);
    const auto s = align_session(l, r, {}, {});
    CHECK(s.left.size() == s.right.size());
    CHECK(std::abs(s.left.meta().start_time_ms - s.right.meta().start_time_ms) < 10.0);
  }
}
