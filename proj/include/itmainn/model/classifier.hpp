#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "itmainn/augment/preprocess.hpp"
#include "itmainn/model/backbone.hpp"
#include "itmainn/model/spec.hpp"
#include "itmainn/model/weights.hpp"

namespace itmainn::model {

class ClassifierHeadImpl : public torch::nn::Module {
 public:
  ClassifierHeadImpl(int input_dim, const HeadSpec& spec);
  torch::Tensor forward(torch::Tensor features);

  torch::nn::Sequential layers{nullptr};
};
TORCH_MODULE(ClassifierHead);

class ClassifierNetImpl : public torch::nn::Module {
 public:
  ClassifierNetImpl(std::shared_ptr<Backbone> backbone, ClassifierHead head);
  torch::Tensor forward(torch::Tensor images);  // logits

  std::shared_ptr<Backbone> backbone;
  ClassifierHead head{nullptr};
};
TORCH_MODULE(ClassifierNet);

// Named copy of every parameter and buffer.
using ModelState = std::vector<std::pair<std::string, torch::Tensor>>;

class ClassifierModel {
 public:
  ClassifierModel(BackboneSpec backbone_spec, HeadSpec head_spec, std::vector<std::string> class_names,
                  std::shared_ptr<Backbone> backbone, ClassifierHead head);

  const BackboneSpec& backbone_spec() const { return backbone_spec_; }
  const HeadSpec& head_spec() const { return head_spec_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  Task task() const { return head_spec_.task; }
  int num_classes() const { return head_spec_.num_classes(); }
  ClassifierNet net() const { return net_; }

  // Raw head output: [N, 1] for binary, [N, C] otherwise.
  torch::Tensor logits(const torch::Tensor& images) const;
  // Class probabilities in double, [N, C]; binary rows are [1 - p, p].
  torch::Tensor probabilities(const torch::Tensor& images) const;
  // Inference-mode prediction; safe to call from several threads once the
  // model is no longer being trained.
  std::vector<std::vector<double>> predict(const std::vector<augment::NormalizedImage>& images) const;

  // Frozen groups stay in eval mode so their normalisation statistics and
  // dropout never move.
  void set_training(bool training);
  std::vector<torch::Tensor> trainable_parameters() const;
  // Rewrites the head's dropout probability.
  void set_dropout(double rate);
  // (parameter name, frozen) for every parameter of the network.
  std::vector<std::pair<std::string, bool>> frozen_mask() const;

  ModelState snapshot() const;
  void restore(const ModelState& state);

  int trained_epochs() const { return trained_epochs_; }
  void set_trained_epochs(int epochs) { trained_epochs_ = epochs; }

 private:
  void apply_freeze();

  BackboneSpec backbone_spec_;
  HeadSpec head_spec_;
  std::vector<std::string> class_names_;
  ClassifierNet net_{nullptr};
  std::vector<std::shared_ptr<torch::nn::Module>> frozen_modules_;
  std::unordered_set<const void*> frozen_params_;
  int trained_epochs_ = 0;
};

// Stacks preprocessed images into a float [N, 3, S, S] tensor.
torch::Tensor to_batch(const std::vector<augment::NormalizedImage>& images);

// Backbone from the provider, head freshly initialised from
// derive_seed(seed, "head"). Throws UnknownBackbone, WeightFetchFailure,
// IncompatibleHead.
ClassifierModel build_model(const BackboneSpec& backbone, const HeadSpec& head, WeightProvider& weights,
                            std::uint64_t seed, std::vector<std::string> class_names = {});

// Default class names for a task (dataset layout order).
std::vector<std::string> default_class_names(Task task);

// Serialises access to the global torch generator.
std::mutex& torch_rng_mutex();

}  // namespace itmainn::model
