#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "itmainn/eval/metrics.hpp"
#include "itmainn/model/classifier.hpp"
#include "itmainn/train/trainer.hpp"

namespace itmainn::train {

enum class SelectionMetric { kF1, kAccuracy, kAuc, kPrecision, kRecall };

std::string_view to_string(SelectionMetric metric);
SelectionMetric parse_selection_metric(std::string_view text);
double metric_value(const eval::MetricReport& report, SelectionMetric metric);

struct HyperGrid {
  std::vector<double> learning_rates{1e-3, 1e-4, 1e-5, 2e-5};
  std::vector<int> batch_sizes{8, 16, 32};
  std::vector<double> dropout_rates{0.2, 0.3, 0.4};
  std::vector<double> weight_decays{1e-4, 1e-5};
  std::vector<Optimizer> optimizers{Optimizer::kAdam, Optimizer::kAdamW};
  SelectionMetric selection_metric = SelectionMetric::kF1;
  // 0 runs the full product; otherwise a seeded subsample of this size.
  std::size_t budget = 0;
  std::uint64_t budget_seed = 0;

  void validate() const;
  std::size_t product_size() const;
  // Cartesian product, learning rate varying slowest, each config copied
  // from `base` for the fields the grid does not cover.
  std::vector<TrainConfig> enumerate(const TrainConfig& base) const;
  // enumerate() after the budget subsample, still in enumeration order.
  std::vector<TrainConfig> candidates(const TrainConfig& base) const;

  nlohmann::json to_json() const;
  static HyperGrid from_json(const nlohmann::json& doc);
};

struct GridCandidate {
  TrainConfig config;
  TrainingRun run;
  eval::MetricReport val_metrics;
};

struct GridResult {
  std::vector<GridCandidate> candidates;
  std::size_t best_index = 0;

  const GridCandidate& best() const { return candidates.at(best_index); }
};

// Highest selection metric; ties go to the lower best validation loss, then
// to the earlier candidate.
std::size_t select_best(const std::vector<GridCandidate>& candidates, SelectionMetric metric);

using ModelBuilder = std::function<model::ClassifierModel(const TrainConfig&)>;
using CandidateObserver = std::function<void(std::size_t index, std::size_t total, const GridCandidate&)>;

// Trains a fresh model per candidate config and scores it on val_set.
// Errors are rethrown with the failing config attached.
GridResult grid_search(const ModelBuilder& builder, const HyperGrid& grid, const TrainConfig& base,
                       const ImageSet& train_set, const ImageSet& val_set,
                       const CandidateObserver& observer = {});

}  // namespace itmainn::train
