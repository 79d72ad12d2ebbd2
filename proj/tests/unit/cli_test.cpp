#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "bundle_fixture.hpp"
#include "fixtures.hpp"
#include "itmainn/cli/cli.hpp"
#include "itmainn/cli/pipeline.hpp"
#include "itmainn/core/io.hpp"
#include "itmainn/core/log.hpp"
#include "itmainn/core/random.hpp"
#include "itmainn/model/registry.hpp"

namespace itmainn::cli {
namespace {

namespace fs = std::filesystem;
using itmainn::testing::TempDir;
using nlohmann::json;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_entries(const fs::path& dir) {
  if (!fs::exists(dir)) return 0;
  return static_cast<std::size_t>(std::distance(fs::recursive_directory_iterator(dir), {}));
}

json quick_config(const fs::path& dataset, const fs::path& runs) {
  return {{"task", "binary"},
          {"dataset", {{"root", dataset.string()}}},
          {"backbone", "mobilevit"},
          {"variant", "tiny"},
          {"train",
           {{"learning_rate", 1e-3}, {"batch_size", 8}, {"dropout_rate", 0.1}, {"max_epochs", 2},
            {"early_stopping", false}}},
          {"split", {{"test_fraction", 0.25}, {"val_fraction", 0.1}}},
          {"output_dir", runs.string()},
          {"seed", 11}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override { log::set_level(log::Level::kWarn); }
  void TearDown() override { log::set_level(log::Level::kInfo); }
};

TEST_F(CliTest, UnknownSubcommandIsAValidationError) {
  const auto r = invoke({"frobnicate", "--config", "x.json"});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("UnknownSubcommand"), std::string::npos);
  EXPECT_EQ(invoke({}).code, kExitValidation);
}

TEST_F(CliTest, HelpExitsZero) {
  for (const auto& cmd : subcommand_names()) {
    const auto r = invoke({cmd, "--help"});
    EXPECT_EQ(r.code, kExitOk) << cmd;
    EXPECT_NE(r.out.find("Usage"), std::string::npos) << cmd;
  }
}

TEST_F(CliTest, ConfigErrorsCarryLineAndColumn) {
  TempDir tmp;
  fs::create_directories(tmp / "data");
  write_file(tmp / "bad.json",
             "{\n  \"dataset\": {\"root\": \"" + (tmp / "data").string() +
                 "\"},\n  \"train\": {},\n  \"split\": {\n    \"test_fraction\": 1.5\n  }\n}\n");
  auto r = invoke({"train", "--config", (tmp / "bad.json").string()});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("bad.json:5:5: /split/test_fraction"), std::string::npos) << r.err;

  write_file(tmp / "unknown.json", "{\n  \"dataset\": {\"root\": \"x\"},\n  \"epochs\": 3\n}\n");
  r = invoke({"train", "--config", (tmp / "unknown.json").string()});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("unknown.json:3:3: /epochs: unknown key"), std::string::npos) << r.err;

  write_file(tmp / "syntax.json", "{\n  \"dataset\": {\"root\": \"x\"},,\n}\n");
  r = invoke({"train", "--config", (tmp / "syntax.json").string()});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("syntax.json:2:"), std::string::npos) << r.err;

  write_file(tmp / "backbone.json", "{\"dataset\": {\"root\": \"" + (tmp / "data").string() +
                                        "\"}, \"backbone\": \"lenet\"}");
  r = invoke({"crossval", "--config", (tmp / "backbone.json").string()});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("/backbones"), std::string::npos) << r.err;

  r = invoke({"train", "--config", (tmp / "missing.json").string()});
  EXPECT_NE(r.code, kExitOk);
}

TEST_F(CliTest, MissingDatasetRootIsReported) {
  TempDir tmp;
  save_json_file(tmp / "run.json", quick_config(tmp / "nowhere", tmp / "runs"));
  const auto r = invoke({"train", "--config", (tmp / "run.json").string()});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("nowhere"), std::string::npos) << r.err;
}

TEST_F(CliTest, DryRunPrintsPlanAndWritesNothing) {
  TempDir tmp;
  itmainn::testing::write_shapes_dataset(tmp / "data", 6, 16, 1);
  auto cfg = quick_config(tmp / "data", tmp / "runs");
  cfg["augmentation"] = {{"target_count_per_class", {{"Monkeypox", 12}, {"Other", 12}}}};
  save_json_file(tmp / "run.json", cfg);
  const auto before = count_entries(tmp.path());
  for (const std::string cmd : {"train", "crossval", "split", "augment"}) {
    const auto r = invoke({"--dry-run", cmd, "--config", (tmp / "run.json").string()});
    EXPECT_EQ(r.code, kExitOk) << cmd << r.err;
    EXPECT_NE(r.out.find("dry run: " + cmd), std::string::npos) << r.out;
  }
  const auto train = invoke({"train", "--config", (tmp / "run.json").string(), "--dry-run"});
  EXPECT_NE(train.out.find("augment to class targets Monkeypox=12 Other=12"), std::string::npos) << train.out;
  EXPECT_NE(train.out.find("train MobileViT"), std::string::npos) << train.out;
  EXPECT_EQ(invoke({"--dry-run", "gridsearch", "--config", (tmp / "run.json").string()}).code, kExitValidation);
  EXPECT_EQ(count_entries(tmp.path()), before);
  EXPECT_FALSE(fs::exists(tmp / "runs"));
}

TEST_F(CliTest, SplitUsesTheGlobalSeedAfterTheSubcommand) {
  TempDir tmp;
  itmainn::testing::write_shapes_dataset(tmp / "data", 10, 16, 2);
  save_json_file(tmp / "run.json", quick_config(tmp / "data", tmp / "runs"));
  const auto r = invoke({"split", "--config", (tmp / "run.json").string(), "--out", (tmp / "s").string(), "--seed", "99"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto plan = dataset::SplitPlan::from_json(load_json_file(tmp / "s" / "split.json"));
  EXPECT_EQ(plan.seed, derive_seed(99, "split"));
  EXPECT_EQ(plan.test_ids.size(), 6u);  // round(0.25 * 10) = 3 per class
  const auto folds = dataset::FoldPlan::from_json(load_json_file(tmp / "s" / "folds.json"));
  EXPECT_EQ(folds.k, 5);
  EXPECT_EQ(folds.seed, derive_seed(99, "folds"));
}

TEST_F(CliTest, IngestPrintsCounts) {
  TempDir tmp;
  itmainn::testing::write_dataset_tree(tmp / "data", dataset::msld_layout(), {3, 4}, {2, 1});
  auto r = invoke({"ingest", "--dataset", (tmp / "data").string(), "--out", (tmp / "m.json").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("Other,3,0,3"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("Monkeypox,4,0,4"), std::string::npos) << r.out;
  EXPECT_EQ(dataset::DatasetManifest::load(tmp / "m.json").size(), 7u);
  r = invoke({"ingest", "--dataset", (tmp / "data").string(), "--include-augmented"});
  EXPECT_NE(r.out.find("Other,3,2,5"), std::string::npos) << r.out;
  EXPECT_EQ(invoke({"ingest", "--dataset", (tmp / "data").string(), "--task", "trinary"}).code, kExitValidation);
}

TEST_F(CliTest, RuntimeFailureExitsTwo) {
  TempDir tmp;
  fs::create_directories(tmp / "data");
  const auto r = invoke({"export", "--run", (tmp / "data").string()});
  EXPECT_EQ(r.code, kExitValidation);  // no model.json: a usage error
  itmainn::testing::write_shapes_dataset(tmp / "shapes", 5, 16, 1);
  itmainn::testing::write_tiny_bundle(tmp / "bundle", dataset::Task::kBinary);
  std::ofstream(tmp / "bundle" / "weights.bin", std::ios::app) << "x";
  const auto e = invoke({"evaluate", "--bundle", (tmp / "bundle").string(), "--dataset", (tmp / "shapes").string()});
  EXPECT_EQ(e.code, kExitRuntime) << e.err;
  EXPECT_NE(e.err.find("ChecksumMismatch"), std::string::npos) << e.err;
}

fs::path only_run(const fs::path& runs) {
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(runs)) dirs.push_back(e.path());
  EXPECT_EQ(dirs.size(), 1u);
  return dirs.at(0);
}

TEST_F(CliTest, TrainExportEvaluateAndReproduce) {
  TempDir tmp;
  itmainn::testing::write_shapes_dataset(tmp / "data", 16, 32, 5);
  save_json_file(tmp / "run.json", quick_config(tmp / "data", tmp / "runs"));

  const auto r = invoke({"train", "--config", (tmp / "run.json").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto run_dir = only_run(tmp / "runs");
  for (const char* file : {"config.json", "split.json", "epoch_log.csv", "checkpoint.pt", "model.json",
                           "metrics.json", "report.csv", "report.md", "bundle/manifest.json"}) {
    EXPECT_TRUE(fs::exists(run_dir / file)) << file;
  }
  const auto log = read_file_text(run_dir / "epoch_log.csv");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 3);
  const auto metrics = load_json_file(run_dir / "metrics.json");
  EXPECT_EQ(metrics.at("backbone"), "mobilevit");
  EXPECT_EQ(metrics.at("metrics").at("n_samples"), 8);

  // The saved config alone reproduces the metrics.
  const auto again = invoke({"train", "--config", (run_dir / "config.json").string(), "--out", (tmp / "again").string()});
  ASSERT_EQ(again.code, kExitOk) << again.err;
  EXPECT_EQ(load_json_file(only_run(tmp / "again") / "metrics.json").at("metrics"), metrics.at("metrics"));

  // Export reproduces the bundle the run wrote.
  ASSERT_EQ(invoke({"export", "--run", run_dir.string(), "--out", (tmp / "exported").string()}).code, kExitOk);
  EXPECT_EQ(read_file_text(tmp / "exported" / "checksum.sha256"),
            read_file_text(run_dir / "bundle" / "checksum.sha256"));

  // Evaluating the bundle on the run's own split matches the training report.
  auto e = invoke({"evaluate", "--bundle", (tmp / "exported").string(), "--dataset", (tmp / "data").string(), "--split",
                   (run_dir / "split.json").string(), "--out", (tmp / "eval").string()});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_EQ(load_json_file(tmp / "eval" / "metrics.json").at("metrics"), metrics.at("metrics"));
  EXPECT_EQ(read_file_text(tmp / "eval" / "report.csv"), read_file_text(run_dir / "report.csv"));

  // --split-seed recreates the split from the dataset; the run used seed 11.
  e = invoke({"evaluate", "--bundle", (tmp / "exported").string(), "--dataset", (tmp / "data").string(), "--split-seed",
              std::to_string(derive_seed(11, "split")), "--test-fraction", "0.25", "--out", (tmp / "eval2").string()});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_EQ(load_json_file(tmp / "eval2" / "metrics.json").at("metrics"), metrics.at("metrics"));
  EXPECT_EQ(e.out.rfind("| Model name | Accuracy | Precision | F1-score | Recall | Loss | AUC |", 0), 0u) << e.out;
  const auto csv = read_file_text(tmp / "eval2" / "report.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "model,accuracy,precision,f1,recall,loss,auc");
}

TEST_F(CliTest, GridsearchCrossvalAndAugmentRuns) {
  TempDir tmp;
  itmainn::testing::write_shapes_dataset(tmp / "data", 12, 32, 6);
  auto cfg = quick_config(tmp / "data", tmp / "runs");
  cfg["train"]["max_epochs"] = 1;
  cfg["grid"] = {{"learning_rate", {1e-3, 1e-4}}, {"batch_size", {8}}, {"dropout_rate", {0.1}},
                 {"weight_decay", {1e-5}}, {"optimizer", {"adamw"}}, {"selection_metric", "accuracy"}};
  cfg["split"]["k"] = 2;
  cfg["augmentation"] = {{"target_count_per_class", {{"Monkeypox", 15}, {"Other", 15}}}};
  save_json_file(tmp / "run.json", cfg);

  auto r = invoke({"gridsearch", "--config", (tmp / "run.json").string(), "--out", (tmp / "grid").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto grid_run = only_run(tmp / "grid");
  const auto grid = load_json_file(grid_run / "grid.json");
  EXPECT_EQ(grid.at("candidates").size(), 2u);
  EXPECT_EQ(grid.at("selection_metric"), "accuracy");
  const auto chosen = grid.at("candidates").at(grid.at("best_index").get<std::size_t>()).at("config");
  EXPECT_EQ(load_json_file(grid_run / "model.json").at("train_config"), chosen);
  EXPECT_TRUE(fs::exists(grid_run / "bundle" / "manifest.json"));
  // 8 training originals per class (12 - 3 test - 1 val) filled up to 15.
  const auto counts = load_json_file(grid_run / "augmented.json");
  EXPECT_EQ(counts.at("Monkeypox").at("augmented"), 7);

  r = invoke({"crossval", "--config", (tmp / "run.json").string(), "--out", (tmp / "cv").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto folds = load_json_file(only_run(tmp / "cv") / "folds.json");
  EXPECT_EQ(folds.at("folds").size(), 2u);
  EXPECT_EQ(folds.at("mean").at("n_samples"), 24);

  r = invoke({"augment", "--config", (tmp / "run.json").string(), "--out", (tmp / "aug").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto manifest = dataset::DatasetManifest::load(tmp / "aug" / "manifest.json");
  EXPECT_EQ(manifest.counts(), (std::vector<std::size_t>{15, 15}));
  EXPECT_EQ(manifest.counts(dataset::Origin::kAugmented), (std::vector<std::size_t>{3, 3}));
}

TEST_F(CliTest, ReportHasOneRowPerBackbone) {
  TempDir tmp;
  Rng rng(4);
  const auto& names = model::backbone_names();
  ASSERT_EQ(names.size(), 9u);
  auto make = [&](const std::string& dir, const std::string& backbone, dataset::Task task, double acc) {
    fs::create_directories(tmp / "runs" / dir);
    eval::MetricReport m;
    m.accuracy = acc;
    m.auc = rng.uniform01();
    m.n_samples = 10;
    write_run_reports(tmp / "runs" / dir, backbone, task, m, eval::LossColumn::kCrossEntropy, "train");
  };
  for (std::size_t i = 0; i < names.size(); ++i) {
    make("20260101T000000Z-" + names[i] + "-train", names[i], dataset::Task::kBinary, 0.5);
  }
  // A newer run of one backbone replaces its older row.
  make("20260102T000000Z-vgg16-train", "vgg16", dataset::Task::kBinary, 0.9);
  fs::create_directories(tmp / "runs" / "scratch");

  const auto r = invoke({"report", "--runs", (tmp / "runs").string(), "--format", "csv"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::vector<std::string> lines;
  std::istringstream in(r.out);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  ASSERT_EQ(lines.size(), 10u) << r.out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    EXPECT_EQ(lines[i + 1].rfind(model::display_name(names[i]) + ",", 0), 0u) << lines[i + 1];
  }
  const auto vgg = std::find_if(lines.begin(), lines.end(), [](const auto& l) { return l.rfind("VGG", 0) == 0; });
  ASSERT_NE(vgg, lines.end());
  EXPECT_NE(vgg->find(",0.9000*"), std::string::npos) << *vgg;

  ASSERT_EQ(invoke({"report", "--runs", (tmp / "runs").string(), "--out", (tmp / "t.md").string()}).code, kExitOk);
  EXPECT_NE(read_file_text(tmp / "t.md").find("| Model name |"), std::string::npos);

  make("20260103T000000Z-vit-train", "vit", dataset::Task::kMulticlass, 0.4);
  EXPECT_EQ(invoke({"report", "--runs", (tmp / "runs").string()}).code, kExitValidation);
  EXPECT_EQ(invoke({"report", "--runs", (tmp / "runs" / "scratch").string()}).code, kExitRuntime);
}

}  // namespace
}  // namespace itmainn::cli
