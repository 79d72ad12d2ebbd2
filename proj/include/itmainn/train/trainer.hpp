#pragma once

#include <functional>
#include <vector>

#include "itmainn/eval/metrics.hpp"
#include "itmainn/model/classifier.hpp"
#include "itmainn/train/config.hpp"
#include "itmainn/train/image_set.hpp"

namespace itmainn::train {

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation set
  double val_accuracy = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainingRun {
  std::vector<EpochRecord> epoch_log;
  int best_epoch = 0;
  model::ModelState best_checkpoint;
  bool stopped_early = false;
  double wall_time_s = 0.0;

  double best_val_loss() const;
};

using EpochObserver = std::function<void(const EpochRecord&)>;

// Fine-tunes the trainable parameters with cross-entropy (sigmoid BCE for
// binary heads). Validation loss is checked after every epoch; training
// stops after `early_stop_patience` epochs without a strict improvement and
// the best checkpoint is restored into `model`. Without a validation set
// (early stopping off) the final epoch is kept.
//
// Batch order and dropout draw from cfg.seed only, so identical inputs give
// an identical epoch log. Runs in one process are serialised.
//
// Throws EmptyTrainingSet, EmptyValidationSet, NonFiniteLoss.
TrainingRun train(model::ClassifierModel& model, const ImageSet& train_set, const ImageSet* val_set,
                  const TrainConfig& cfg, const EpochObserver& observer = {});

// Mean loss over a set in inference mode, as used for validation.
double mean_loss(const model::ClassifierModel& model, const ImageSet& set, int batch_size);

// Scores every image of a set; predicted labels use `threshold` for binary
// heads and argmax otherwise.
eval::PredictionBatch predict_set(const model::ClassifierModel& model, const ImageSet& set, int batch_size = 32,
                                  double threshold = 0.5);

// Per-sample loss of head logits against integer labels, averaged.
torch::Tensor classification_loss(const torch::Tensor& logits, const torch::Tensor& labels, dataset::Task task);

}  // namespace itmainn::train
