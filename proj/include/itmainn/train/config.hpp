#pragma once

#include <cstdint>
#include <string_view>

#include <nlohmann/json.hpp>

namespace itmainn::train {

enum class Optimizer { kAdam, kAdamW };

std::string_view to_string(Optimizer optimizer);
Optimizer parse_optimizer(std::string_view text);

struct TrainConfig {
  double learning_rate = 2e-5;
  int batch_size = 16;
  double dropout_rate = 0.3;
  double weight_decay = 1e-5;
  Optimizer optimizer = Optimizer::kAdamW;
  int max_epochs = 50;
  int early_stop_patience = 5;
  bool early_stopping = true;
  std::uint64_t seed = 42;

  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults.
  static TrainConfig from_json(const nlohmann::json& doc);

  bool operator==(const TrainConfig&) const = default;
};

}  // namespace itmainn::train
