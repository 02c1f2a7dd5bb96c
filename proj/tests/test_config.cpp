#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "arc/config.hpp"

using namespace arc;

namespace {

std::string dump(const PipelineConfig& c) {
  std::ostringstream out;
  write_config(out, c);
  return out.str();
}

PipelineConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

Errc code_of(const std::string& text, std::size_t* line = nullptr) {
  try {
    parse(text);
  } catch (const Error& e) {
    if (line) *line = e.line();
    return e.code();
  }
  FAIL("expected an error");
  return Errc::io;
}

}  // namespace

TEST_CASE("defaults") {
  const PipelineConfig c;
  CHECK(c.dataset.drift.highpass_window_s == 2.0);
  CHECK(c.dataset.rest.energy_threshold == 0.05);
  CHECK(c.dataset.window.window_s == 3.0);
  CHECK(c.dataset.channels.channels.size() == 12);
  CHECK(c.dataset.overlap_threshold == 0.5);
  CHECK(c.svm.c == 1.0);
  CHECK(c.cnn.temporal_kernel == 50);
  CHECK(c.split.train == 0.6);
  CHECK(c.split.val == 0.2);
  CHECK(c.split.test == 0.2);
  CHECK(c.synth.n_subjects == 25);
  CHECK(c.synth.l2_sessions == 3);
  CHECK(c.synth.protocol.rest_s == 5.0);
  CHECK(c.eval.classifiers.size() == 2);
  CHECK_FALSE(c.eval.cnn_on_patients);
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("written config parses back to the same config") {
  PipelineConfig c;
  c.seed = 123456789012345ULL;
  c.dataset.fuse = true;
  c.dataset.channels.channels = {ChannelId::from_index(0), ChannelId::from_index(10)};
  c.dataset.spot.peak_channel = ChannelId::from_index(1);
  c.svm.c = 0.1;
  c.cnn.f1 = 4;
  c.split.unit = SplitUnit::session;
  c.synth_patients = 7;
  c.eval.classifiers = {Classifier::svm};
  c.eval.train_population = TrainPopulation::healthy;
  c.eval.window_grid = {1.5, 2.5};
  c.paths.data = "/tmp/x";
  const auto text = dump(c);
  CHECK(dump(parse(text)) == text);
  CHECK(dump(parse(dump(PipelineConfig{}))) == dump(PipelineConfig{}));
  CHECK(parse("seed = 9\n").seed == 9);
}

TEST_CASE("comments and blank lines are ignored") {
  const auto c = parse("# header\n\nsvm.c = 10   # stronger\nwindow.window_s=4\n");
  CHECK(c.svm.c == 10.0);
  CHECK(c.dataset.window.window_s == 4.0);
}

TEST_CASE("config errors carry line numbers") {
  std::size_t line = 0;
  CHECK(code_of("seed = 1\n\nsvm.cc = 2\n", &line) == Errc::unknown_key);
  CHECK(line == 3);
  CHECK(code_of("svm.c = banana\n", &line) == Errc::invalid_config);
  CHECK(line == 1);
  CHECK(code_of("seed = 1\nno equals sign\n", &line) == Errc::invalid_config);
  CHECK(line == 2);
  CHECK(code_of("svm.c = -1\n") == Errc::invalid_config);
  CHECK(code_of("split.train = 0.9\n") == Errc::invalid_config);
  CHECK(code_of("features.channels = acc_q\n") == Errc::invalid_config);
  CHECK(code_of("eval.classifiers = svm,knn\n") == Errc::invalid_config);
  CHECK(category(Errc::unknown_key) == ErrorCategory::config);
}

TEST_CASE("with_seed replaces only the seed") {
  PipelineConfig c;
  c.svm.c = 3;
  const auto d = with_seed(c, 42);
  CHECK(d.seed == 42);
  CHECK(d.svm.c == 3);
}
