#pragma once

#include <memory>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "itmainn/model/spec.hpp"

namespace itmainn::model {

// A named slice of the network, in input-to-output order. Freezing works on
// whole groups.
struct LayerGroup {
  std::string name;
  std::vector<std::shared_ptr<torch::nn::Module>> modules;

  std::vector<torch::Tensor> parameters() const;
};

// Feature extractor: [N, 3, H, W] images to [N, feature_dim] features.
class Backbone : public torch::nn::Module {
 public:
  virtual torch::Tensor forward(torch::Tensor images) = 0;
  virtual int feature_dim() const = 0;

  const std::vector<LayerGroup>& layer_groups() const { return groups_; }
  bool has_group(const std::string& name) const;

 protected:
  void add_group(std::string name, std::vector<std::shared_ptr<torch::nn::Module>> modules) {
    groups_.push_back({std::move(name), std::move(modules)});
  }

 private:
  std::vector<LayerGroup> groups_;
};

}  // namespace itmainn::model
