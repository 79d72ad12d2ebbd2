#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "itmainn/augment/preprocess.hpp"
#include "itmainn/dataset/manifest.hpp"
#include "itmainn/dataset/split.hpp"
#include "itmainn/eval/metrics.hpp"
#include "itmainn/model/classifier.hpp"
#include "itmainn/train/trainer.hpp"

namespace itmainn::train {

struct CrossValOptions {
  int k = 5;
  double val_fraction = 0.1;
  std::uint64_t seed = 42;
  dataset::Rounding rounding = dataset::Rounding::kHalfUp;
  bool include_augmented = true;
  bool cache_images = false;
  double threshold = 0.5;
  // Unset: the evaluator default for the class count.
  std::optional<eval::Averaging> averaging;
};

struct FoldOutcome {
  int fold = 0;
  dataset::SplitPlan plan;
  TrainingRun run;
  eval::MetricReport metrics;  // on the held-out fold
};

struct CrossValidation {
  std::vector<FoldOutcome> folds;
  eval::MetricReport mean;  // unweighted mean over folds

  nlohmann::json to_json() const;
};

using FoldModelBuilder = std::function<model::ClassifierModel(int fold)>;
using FoldObserver = std::function<void(const FoldOutcome&)>;

// k rotations: each fold is the test set once, validation is carved per
// class from the remaining folds, and a fresh model is trained on the rest.
CrossValidation cross_validate(const dataset::DatasetManifest& manifest, const augment::PreprocessSpec& preprocess,
                               const FoldModelBuilder& builder, const TrainConfig& cfg,
                               const CrossValOptions& options, const FoldObserver& observer = {});

}  // namespace itmainn::train
