#include "itmainn/model/backbone.hpp"

#include <algorithm>

namespace itmainn::model {

std::vector<torch::Tensor> LayerGroup::parameters() const {
  std::vector<torch::Tensor> out;
  for (const auto& m : modules) {
    for (auto& p : m->parameters()) out.push_back(p);
  }
  return out;
}

bool Backbone::has_group(const std::string& name) const {
  return std::any_of(groups_.begin(), groups_.end(), [&](const LayerGroup& g) { return g.name == name; });
}

}  // namespace itmainn::model
