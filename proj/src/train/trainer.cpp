#include "itmainn/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "itmainn/core/error.hpp"
#include "itmainn/core/log.hpp"
#include "itmainn/core/random.hpp"

namespace itmainn::train {

namespace {

// Consecutive batches over `order`. A trailing batch of one is folded into
// its predecessor: batch norm cannot train on a single sample.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, int batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const auto end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

torch::Tensor label_tensor(const ImageSet& set, const std::vector<std::size_t>& indices) {
  std::vector<int64_t> labels;
  labels.reserve(indices.size());
  for (auto i : indices) labels.push_back(set.label(i));
  return torch::tensor(labels, torch::kInt64);
}

void check_labels(const ImageSet& set, int n_classes, const char* what) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    const int y = set.label(i);
    if (y < 0 || y >= n_classes) {
      fail(ErrorKind::kLabelOutOfRange, std::string(what) + " label " + std::to_string(y) + " outside [0, " +
                                            std::to_string(n_classes) + ")");
    }
  }
}

struct SetScore {
  double loss = 0.0;
  double accuracy = 0.0;
};

SetScore score_set(const model::ClassifierModel& model, const ImageSet& set, int batch_size) {
  torch::NoGradGuard guard;
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), 0);
  double loss = 0.0, correct = 0.0;
  for (const auto& idx : make_batches(order, batch_size)) {
    const auto logits = model.logits(set.batch(idx));
    const auto labels = label_tensor(set, idx);
    loss += classification_loss(logits, labels, model.task()).item<double>() * static_cast<double>(idx.size());
    torch::Tensor pred;
    if (model.task() == dataset::Task::kBinary) {
      pred = (logits.select(1, 0) >= 0).to(torch::kInt64);  // sigmoid(z) >= 0.5
    } else {
      pred = logits.argmax(1);
    }
    correct += pred.eq(labels).sum().item<double>();
  }
  const auto n = static_cast<double>(set.size());
  return {loss / n, correct / n};
}

}  // namespace

double TrainingRun::best_val_loss() const {
  for (const auto& r : epoch_log) {
    if (r.epoch == best_epoch) return r.val_loss;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

torch::Tensor classification_loss(const torch::Tensor& logits, const torch::Tensor& labels, dataset::Task task) {
  if (task == dataset::Task::kBinary) {
    return torch::binary_cross_entropy_with_logits(logits.select(1, 0), labels.to(logits.scalar_type()));
  }
  return torch::nn::functional::cross_entropy(logits, labels);
}

double mean_loss(const model::ClassifierModel& model, const ImageSet& set, int batch_size) {
  if (set.empty()) fail(ErrorKind::kEmptyBatch, "cannot score an empty set");
  return score_set(model, set, batch_size).loss;
}

TrainingRun train(model::ClassifierModel& model, const ImageSet& train_set, const ImageSet* val_set,
                  const TrainConfig& cfg, const EpochObserver& observer) {
  cfg.validate();
  if (train_set.empty()) fail(ErrorKind::kEmptyTrainingSet, "training set is empty");
  const bool has_val = val_set != nullptr && !val_set->empty();
  if (cfg.early_stopping && !has_val) {
    fail(ErrorKind::kEmptyValidationSet, "early stopping needs a non-empty validation set");
  }
  check_labels(train_set, model.num_classes(), "training");
  if (has_val) check_labels(*val_set, model.num_classes(), "validation");

  std::lock_guard lock(model::torch_rng_mutex());
  torch::manual_seed(derive_seed(cfg.seed, "torch"));
  model.set_dropout(cfg.dropout_rate);
  auto params = model.trainable_parameters();
  if (params.empty()) fail(ErrorKind::kInvalidArgument, "model has no trainable parameters");

  std::unique_ptr<torch::optim::Optimizer> optimizer;
  if (cfg.optimizer == Optimizer::kAdam) {
    optimizer = std::make_unique<torch::optim::Adam>(
        params, torch::optim::AdamOptions(cfg.learning_rate).weight_decay(cfg.weight_decay));
  } else {
    optimizer = std::make_unique<torch::optim::AdamW>(
        params, torch::optim::AdamWOptions(cfg.learning_rate).weight_decay(cfg.weight_decay));
  }

  const auto started = std::chrono::steady_clock::now();
  TrainingRun run;
  double best_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<std::size_t> order(train_set.size());

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    model.set_training(true);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, "epoch/" + std::to_string(epoch)));
    rng.shuffle(std::span(order));

    double total = 0.0;
    for (const auto& idx : make_batches(order, cfg.batch_size)) {
      optimizer->zero_grad();
      const auto logits = model.net()->forward(train_set.batch(idx));
      auto loss = classification_loss(logits, label_tensor(train_set, idx), model.task());
      const double value = loss.item<double>();
      if (!std::isfinite(value)) {
        fail(ErrorKind::kNonFiniteLoss, "training loss became " + std::to_string(value) + " in epoch " +
                                            std::to_string(epoch));
      }
      loss.backward();
      optimizer->step();
      total += value * static_cast<double>(idx.size());
    }
    model.set_training(false);

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = total / static_cast<double>(train_set.size());
    record.val_loss = std::numeric_limits<double>::quiet_NaN();
    record.val_accuracy = std::numeric_limits<double>::quiet_NaN();
    if (has_val) {
      const auto score = score_set(model, *val_set, std::max(cfg.batch_size, 32));
      if (!std::isfinite(score.loss)) {
        fail(ErrorKind::kNonFiniteLoss, "validation loss became non-finite in epoch " + std::to_string(epoch));
      }
      record.val_loss = score.loss;
      record.val_accuracy = score.accuracy;
    }
    run.epoch_log.push_back(record);
    log::debug("epoch " + std::to_string(epoch) + " train_loss=" + std::to_string(record.train_loss) +
               " val_loss=" + std::to_string(record.val_loss));
    if (observer) observer(record);

    if (has_val) {
      if (record.val_loss < best_loss) {
        best_loss = record.val_loss;
        run.best_epoch = epoch;
        run.best_checkpoint = model.snapshot();
        since_best = 0;
      } else if (++since_best >= cfg.early_stop_patience && cfg.early_stopping) {
        run.stopped_early = epoch < cfg.max_epochs;
        break;
      }
    }
  }

  if (has_val) {
    model.restore(run.best_checkpoint);
  } else {
    run.best_epoch = run.epoch_log.back().epoch;
    run.best_checkpoint = model.snapshot();
  }
  model.set_trained_epochs(model.trained_epochs() + static_cast<int>(run.epoch_log.size()));
  model.set_training(false);
  run.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return run;
}

eval::PredictionBatch predict_set(const model::ClassifierModel& model, const ImageSet& set, int batch_size,
                                  double threshold) {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<std::vector<double>> scores;
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), 0);
  torch::NoGradGuard guard;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
    const auto probs = model.probabilities(set.batch(idx)).contiguous();
    const auto c = probs.size(1);
    const double* data = probs.data_ptr<double>();
    for (std::size_t j = 0; j < idx.size(); ++j) {
      ids.push_back(set.id(idx[j]));
      labels.push_back(set.label(idx[j]));
      scores.emplace_back(data + j * c, data + (j + 1) * c);
    }
  }
  return eval::PredictionBatch::from_scores(std::move(ids), std::move(labels), std::move(scores), threshold);
}

}  // namespace itmainn::train
