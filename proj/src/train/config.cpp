#include "itmainn/train/config.hpp"

#include <cmath>

#include "itmainn/core/error.hpp"

namespace itmainn::train {

std::string_view to_string(Optimizer optimizer) { return optimizer == Optimizer::kAdam ? "adam" : "adamw"; }

Optimizer parse_optimizer(std::string_view text) {
  if (text == "adam") return Optimizer::kAdam;
  if (text == "adamw") return Optimizer::kAdamW;
  fail(ErrorKind::kInvalidArgument, "unknown optimizer '" + std::string(text) + "' (expected adam or adamw)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    fail(ErrorKind::kInvalidArgument, "learning_rate must be positive");
  }
  if (batch_size < 1) fail(ErrorKind::kInvalidArgument, "batch_size must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail(ErrorKind::kInvalidArgument, "dropout_rate must be in [0, 1)");
  if (!(weight_decay >= 0.0)) fail(ErrorKind::kInvalidArgument, "weight_decay must be >= 0");
  if (max_epochs < 1) fail(ErrorKind::kInvalidArgument, "max_epochs must be >= 1");
  if (early_stop_patience < 1) fail(ErrorKind::kInvalidArgument, "early_stop_patience must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"dropout_rate", dropout_rate},
          {"weight_decay", weight_decay},
          {"optimizer", to_string(optimizer)},
          {"max_epochs", max_epochs},
          {"early_stop_patience", early_stop_patience},
          {"early_stopping", early_stopping},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& doc) {
  TrainConfig cfg;
  try {
    cfg.learning_rate = doc.value("learning_rate", cfg.learning_rate);
    cfg.batch_size = doc.value("batch_size", cfg.batch_size);
    cfg.dropout_rate = doc.value("dropout_rate", cfg.dropout_rate);
    cfg.weight_decay = doc.value("weight_decay", cfg.weight_decay);
    cfg.optimizer = parse_optimizer(doc.value("optimizer", std::string(to_string(cfg.optimizer))));
    cfg.max_epochs = doc.value("max_epochs", cfg.max_epochs);
    cfg.early_stop_patience = doc.value("early_stop_patience", cfg.early_stop_patience);
    cfg.early_stopping = doc.value("early_stopping", cfg.early_stopping);
    cfg.seed = doc.value("seed", cfg.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfigError, std::string("malformed train config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace itmainn::train
