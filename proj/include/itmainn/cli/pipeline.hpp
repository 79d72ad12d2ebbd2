#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "itmainn/cli/run_config.hpp"
#include "itmainn/dataset/manifest.hpp"
#include "itmainn/dataset/split.hpp"
#include "itmainn/eval/report.hpp"
#include "itmainn/model/bundle.hpp"
#include "itmainn/model/weights.hpp"
#include "itmainn/train/crossval.hpp"
#include "itmainn/train/trainer.hpp"

namespace itmainn::cli {

// Files every training-style run directory holds besides the trainer's own.
inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kModelFile = "model.json";
inline constexpr const char* kSplitFile = "split.json";
inline constexpr const char* kBundleDir = "bundle";

dataset::DatasetManifest load_manifest(const RunConfig& config);
std::unique_ptr<model::WeightProvider> weight_provider(const RunConfig& config);

struct StageResult {
  std::filesystem::path run_dir;
  std::string backbone;
  eval::MetricReport metrics;
};

// Split, optional augmentation of the training part, training (or grid search
// followed by a retrain of the winner), test evaluation, bundle export.
StageResult train_backbone(const RunConfig& config, const std::string& backbone, bool grid_search);
StageResult crossval_backbone(const RunConfig& config, const std::string& backbone);

struct AugmentResult {
  std::filesystem::path out_dir;
  dataset::DatasetManifest manifest;  // originals plus new images
};
// Augments the split's training ids, or every original when no split is given.
AugmentResult augment_dataset(const RunConfig& config, const std::optional<dataset::SplitPlan>& split,
                              const std::filesystem::path& out_dir);

struct EvaluateOptions {
  std::filesystem::path bundle;
  std::filesystem::path dataset_root;
  std::optional<dataset::DatasetLayout> layout;
  dataset::SplitPlan split;  // only test_ids are used
  double threshold = 0.5;
  std::optional<eval::Averaging> averaging;
};
// Scores the bundle on the split's test images.
eval::MetricReport evaluate_bundle(const EvaluateOptions& options, std::string* backbone = nullptr);

// Writes report.csv and report.md next to metrics.json.
void write_run_reports(const std::filesystem::path& dir, const std::string& backbone, dataset::Task task,
                       const eval::MetricReport& metrics, eval::LossColumn loss, const std::string& kind);

// Newest metrics.json per backbone under runs/, in registry order.
std::vector<eval::NamedReport> collect_reports(const std::filesystem::path& runs_dir);

// Re-exports a run directory's checkpoint as a deployment bundle.
model::BundleManifest export_run(const std::filesystem::path& run_dir, const std::filesystem::path& out);

// One line per stage the command would execute.
std::vector<std::string> describe_plan(const std::string& command, const RunConfig& config);

}  // namespace itmainn::cli
