#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "itmainn/augment/augment.hpp"
#include "itmainn/dataset/ingest.hpp"
#include "itmainn/dataset/split.hpp"
#include "itmainn/eval/metrics.hpp"
#include "itmainn/eval/report.hpp"
#include "itmainn/train/config.hpp"
#include "itmainn/train/grid.hpp"

namespace itmainn::cli {

struct DatasetConfig {
  std::filesystem::path root;
  std::optional<dataset::DatasetLayout> layout;  // defaults to the task's layout
  // Shipped augmented images carry no link to their source image, so they
  // could leak held-out lesions into training. Off unless asked for.
  bool include_shipped_augmented = false;
  bool skip_undecodable = false;
};

struct SplitConfig {
  double test_fraction = 0.2;
  double val_fraction = 0.1;
  dataset::Rounding rounding = dataset::Rounding::kHalfUp;
  int k = 5;
};

struct EvalConfig {
  double threshold = 0.5;
  std::optional<eval::Averaging> averaging;  // task default when empty
  eval::LossColumn loss_column = eval::LossColumn::kCrossEntropy;
};

// Seeds for each stage, all expanded from the run seed.
struct StageSeeds {
  std::uint64_t split = 0;
  std::uint64_t folds = 0;
  std::uint64_t augment = 0;
  std::uint64_t model = 0;
  std::uint64_t train = 0;
  std::uint64_t grid = 0;
  static StageSeeds expand(std::uint64_t seed);
};

struct RunConfig {
  dataset::Task task = dataset::Task::kBinary;
  DatasetConfig dataset;
  std::optional<augment::AugmentationConfig> augmentation;
  std::vector<std::string> backbones{"mobilevit"};
  std::string variant = "base";
  // Local weight cache; empty means seeded random initialisation.
  std::filesystem::path weights_dir;
  // Training settings; also the base every grid candidate starts from.
  std::optional<train::TrainConfig> train;
  std::optional<train::HyperGrid> grid;  // required by gridsearch
  SplitConfig split;
  EvalConfig evaluation;
  std::filesystem::path output_dir = "runs";
  std::string name;
  std::uint64_t seed = 42;
  bool cache_images = false;

  dataset::DatasetLayout layout() const;
  StageSeeds seeds() const { return StageSeeds::expand(seed); }
  // Train config with the stage seed applied (defaults when absent).
  train::TrainConfig train_config() const;
  std::optional<augment::AugmentationConfig> augmentation_config() const;
  train::HyperGrid grid_config() const;

  // Throws ConfigError. Structural rules only; see check_references.
  void validate() const;
  // Dataset root and weight cache exist. Throws ConfigError.
  void check_references() const;

  // validate() with errors reported as "source:line:col: /json/pointer: reason".
  void validate_in(const std::string& source, const std::string& text) const;

  nlohmann::json to_json() const;
  // Parsing without validation; type errors carry the same location prefix.
  static RunConfig parse(const nlohmann::json& doc, const std::string& source = "config",
                         const std::string& text = "");
  static RunConfig from_json(const nlohmann::json& doc, const std::string& source = "config",
                             const std::string& text = "");
};

// Parse, apply command-line overrides, then validate.
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::function<void(RunConfig&)>& overrides = {});

// Best-effort 1-based line:column of the member named by a JSON pointer in
// the original text; empty when it cannot be located.
std::string locate_pointer(const std::string& text, const std::string& pointer);

}  // namespace itmainn::cli
