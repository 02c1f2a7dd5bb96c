#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>

#include "arc/corpus_io.hpp"
#include "arc/pipeline.hpp"

using namespace arc;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_config() {
  PipelineConfig c;
  c.seed = 5;
  c.synth.n_subjects = 3;
  c.synth_patients = 2;
  c.eval.classifiers = {Classifier::svm};
  c.eval.window_grid = {};
  return c;
}

std::string csv(const PipelineResult& r) {
  std::ostringstream out;
  write_results_csv(out, r.table);
  return out.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("arc_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("names") {
  CHECK(variant_name({Population::healthy, Scenario::L1, Segmentation::action}) == "L1_healthy_action");
  CHECK(cell_name({Scenario::L2, Population::patient, Segmentation::spotting, Classifier::svm}) ==
        "L2_patient_spotting_svm");
}

TEST_CASE("synthetic plan") {
  const auto cfg = small_config();
  const auto jobs = synthetic_plan(cfg);
  CHECK(jobs.size() == 5 * 7);
  std::size_t patients = 0;
  for (const auto& j : jobs)
    if (j.entry.protocol.population == Population::patient) {
      ++patients;
      CHECK(j.entry.session_id.front() == 'P');
      CHECK(j.entry.protocol.affected_wrist.has_value());
    }
  CHECK(patients == 14);
}

TEST_CASE("small pipeline fills every svm cell deterministically") {
  const auto cfg = small_config();
  const auto a = run_pipeline(synthetic_source(cfg), cfg);
  CHECK(a.table.cells.size() == 8);
  for (const auto& [k, cell] : a.table.cells) {
    CHECK(k.classifier == Classifier::svm);
    CHECK(cell.accuracy >= 0.0);
    CHECK(cell.accuracy <= 1.0);
    CHECK(cell.n_test == cell.confusion.total());
    CHECK(cell.accuracy == static_cast<double>(cell.confusion.trace()) / static_cast<double>(cell.n_test));
  }
  const auto b = run_pipeline(synthetic_source(cfg), cfg);
  CHECK(csv(a) == csv(b));
  CHECK_FALSE(a.window_search.has_value());

  auto other = cfg;
  other.seed = 6;
  CHECK(csv(run_pipeline(synthetic_source(other), other)) != csv(a));
}

TEST_CASE("confusion rows match the test-set class counts") {
  const auto cfg = small_config();
  const auto source = synthetic_source(cfg);
  const auto variants = build_variants(source, cfg);
  const auto r = run_pipeline(source, cfg);
  for (const auto& run : r.runs) {
    const VariantKey vk{run.key.population, run.key.scenario, run.key.segmentation};
    SplitSpec spec = cfg.split;
    spec.seed = sub_seed(cfg.seed, "split/" + variant_name(vk));
    const auto& ds = variants.at(vk);
    const auto test = ds.subset(split_indices(ds, spec).test);
    std::map<MovementClass, std::size_t> counts;
    for (const auto& it : test.items) ++counts[it.label];
    const auto& cm = run.result.confusion;
    for (std::size_t k = 0; k < cm.classes().size(); ++k) CHECK(cm.row_sum(k) == counts[cm.classes()[k]]);
  }
}

TEST_CASE("patients can be scored against a healthy-trained model") {
  auto cfg = small_config();
  cfg.eval.train_population = TrainPopulation::healthy;
  const auto r = run_pipeline(synthetic_source(cfg), cfg);
  CHECK(r.table.cells.size() == 8);
  const auto same = run_pipeline(synthetic_source(small_config()), small_config());
  const CellKey healthy{Scenario::L1, Population::healthy, Segmentation::action, Classifier::svm};
  CHECK(r.table.cells.at(healthy).accuracy == same.table.cells.at(healthy).accuracy);
}

TEST_CASE("window grid search runs before the cells") {
  auto cfg = small_config();
  cfg.synth_patients = 0;
  cfg.eval.window_grid = {2.0, 3.0};
  const auto r = run_pipeline(synthetic_source(cfg), cfg);
  REQUIRE(r.window_search.has_value());
  CHECK(r.window_search->scores.size() == 2);
  CHECK((r.window_search->best == 2.0 || r.window_search->best == 3.0));
}

TEST_CASE("sessions written to disk reproduce the in-memory results") {
  auto cfg = small_config();
  cfg.synth.n_subjects = 2;
  cfg.synth_patients = 0;
  TempDir dir;
  for (const auto& job : synthetic_plan(cfg)) write_session(dir.path, job.generate());
  const auto disk = directory_source(dir.path);
  CHECK(collect(disk).size() == 14);
  CHECK(csv(run_pipeline(disk, cfg)) == csv(run_pipeline(synthetic_source(cfg), cfg)));
}

TEST_CASE("corpus io errors") {
  TempDir dir;
  CHECK_THROWS_AS(list_sessions(dir.path), Error);
  CHECK_THROWS_AS(list_sessions(dir.path / "missing"), Error);
  try {
    list_sessions(dir.path / "missing");
  } catch (const Error& e) {
    CHECK(category(e.code()) == ErrorCategory::data);
  }
}
