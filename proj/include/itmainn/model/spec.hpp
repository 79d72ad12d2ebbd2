#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "itmainn/augment/preprocess.hpp"
#include "itmainn/dataset/manifest.hpp"

namespace itmainn::model {

using dataset::Task;

struct BackboneSpec {
  std::string name;     // registry key, e.g. "mobilevit"
  std::string variant;  // "base" (published size) or "tiny" (test scale)
  std::string weight_source_id;
  int input_size = 224;
  int feature_dim = 0;
  // First trainable layer group; every group before it is frozen.
  std::string freeze_boundary;
  augment::PreprocessSpec preprocess;
  // Architecture hyperparameters read by the builder (widths, depths, ...).
  nlohmann::json arch = nlohmann::json::object();

  void validate() const;
  nlohmann::json to_json() const;
  static BackboneSpec from_json(const nlohmann::json& doc);
};

enum class Activation { kSigmoid, kSoftmax };

std::string_view to_string(Activation activation);
Activation parse_activation(std::string_view text);

struct HeadSpec {
  Task task = Task::kBinary;
  std::vector<int> hidden_dims{256};
  double dropout_rate = 0.3;
  int output_dim = 1;
  Activation output_activation = Activation::kSigmoid;
  // Expected backbone feature width; 0 accepts whatever the backbone emits.
  int input_dim = 0;

  static HeadSpec for_task(Task task, double dropout_rate = 0.3);
  int num_classes() const { return task == Task::kBinary ? 2 : output_dim; }
  void validate() const;
  nlohmann::json to_json() const;
  static HeadSpec from_json(const nlohmann::json& doc);
};

}  // namespace itmainn::model
