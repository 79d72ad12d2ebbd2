#include "itmainn/model/spec.hpp"

#include "itmainn/core/error.hpp"

namespace itmainn::model {

void BackboneSpec::validate() const {
  if (name.empty()) fail(ErrorKind::kInvalidArgument, "backbone name is empty");
  if (feature_dim <= 0) fail(ErrorKind::kInvalidArgument, "feature_dim must be positive");
  if (input_size <= 0) fail(ErrorKind::kInvalidArgument, "input_size must be positive");
  if (freeze_boundary.empty()) fail(ErrorKind::kInvalidArgument, "freeze_boundary is empty");
  preprocess.validate();
}

nlohmann::json BackboneSpec::to_json() const {
  return {{"name", name},
          {"variant", variant},
          {"weight_source_id", weight_source_id},
          {"input_size", input_size},
          {"feature_dim", feature_dim},
          {"freeze_boundary", freeze_boundary},
          {"preprocess", preprocess.to_json()},
          {"arch", arch}};
}

BackboneSpec BackboneSpec::from_json(const nlohmann::json& doc) {
  BackboneSpec spec;
  try {
    spec.name = doc.at("name").get<std::string>();
    spec.variant = doc.value("variant", std::string("base"));
    spec.weight_source_id = doc.value("weight_source_id", std::string());
    spec.input_size = doc.at("input_size").get<int>();
    spec.feature_dim = doc.at("feature_dim").get<int>();
    spec.freeze_boundary = doc.at("freeze_boundary").get<std::string>();
    spec.preprocess = augment::PreprocessSpec::from_json(doc.at("preprocess"));
    spec.arch = doc.value("arch", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfigError, std::string("malformed backbone spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string_view to_string(Activation activation) {
  return activation == Activation::kSigmoid ? "sigmoid" : "softmax";
}

Activation parse_activation(std::string_view text) {
  if (text == "sigmoid") return Activation::kSigmoid;
  if (text == "softmax") return Activation::kSoftmax;
  fail(ErrorKind::kInvalidArgument, "unknown activation '" + std::string(text) + "'");
}

HeadSpec HeadSpec::for_task(Task task, double dropout_rate) {
  HeadSpec spec;
  spec.task = task;
  spec.dropout_rate = dropout_rate;
  if (task == Task::kBinary) {
    spec.output_dim = 1;
    spec.output_activation = Activation::kSigmoid;
  } else {
    spec.output_dim = static_cast<int>(dataset::kMulticlassClassCount);
    spec.output_activation = Activation::kSoftmax;
  }
  return spec;
}

void HeadSpec::validate() const {
  if (task == Task::kBinary && (output_dim != 1 || output_activation != Activation::kSigmoid)) {
    fail(ErrorKind::kInvalidArgument, "binary head must have one sigmoid output");
  }
  if (task == Task::kMulticlass &&
      (output_dim != static_cast<int>(dataset::kMulticlassClassCount) || output_activation != Activation::kSoftmax)) {
    fail(ErrorKind::kInvalidArgument, "multiclass head must have 6 softmax outputs");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail(ErrorKind::kInvalidArgument, "dropout_rate must be in [0, 1)");
  for (int h : hidden_dims) {
    if (h <= 0) fail(ErrorKind::kInvalidArgument, "hidden layer widths must be positive");
  }
  if (input_dim < 0) fail(ErrorKind::kInvalidArgument, "input_dim must be >= 0");
}

nlohmann::json HeadSpec::to_json() const {
  return {{"task", dataset::to_string(task)},
          {"hidden_dims", hidden_dims},
          {"dropout_rate", dropout_rate},
          {"output_dim", output_dim},
          {"output_activation", to_string(output_activation)},
          {"input_dim", input_dim}};
}

HeadSpec HeadSpec::from_json(const nlohmann::json& doc) {
  HeadSpec spec;
  try {
    spec.task = dataset::parse_task(doc.at("task").get<std::string>());
    spec = for_task(spec.task, doc.value("dropout_rate", 0.3));
    spec.hidden_dims = doc.value("hidden_dims", std::vector<int>{256});
    if (doc.contains("output_dim")) spec.output_dim = doc.at("output_dim").get<int>();
    if (doc.contains("output_activation")) {
      spec.output_activation = parse_activation(doc.at("output_activation").get<std::string>());
    }
    spec.input_dim = doc.value("input_dim", 0);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfigError, std::string("malformed head spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

}  // namespace itmainn::model
