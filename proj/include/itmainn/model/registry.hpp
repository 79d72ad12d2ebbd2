#pragma once

#include <memory>
#include <string>
#include <vector>

#include "itmainn/model/backbone.hpp"
#include "itmainn/model/spec.hpp"

namespace itmainn::model {

// The nine supported architectures, in report order.
const std::vector<std::string>& backbone_names();
const std::vector<std::string>& variant_names();
bool is_transformer(const std::string& name);
// Name used in reports ("MobileViT", "EfficientNet-B0", ...).
std::string display_name(const std::string& name);

// Registry defaults for a backbone. "base" mirrors the published
// checkpoint; "tiny" keeps the topology at a size that trains on a CPU in
// seconds. Throws UnknownBackbone.
BackboneSpec registry_spec(const std::string& name, const std::string& variant = "base");

// Instantiates the (randomly initialised) network for a spec. Uses the
// global torch generator; callers seed it.
std::shared_ptr<Backbone> make_backbone(const BackboneSpec& spec);

}  // namespace itmainn::model
