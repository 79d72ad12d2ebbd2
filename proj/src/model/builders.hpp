#pragma once

// Per-family constructors behind make_backbone. Internal header.

#include <memory>

#include "itmainn/model/backbone.hpp"
#include "itmainn/model/spec.hpp"

namespace itmainn::model::detail {

std::shared_ptr<Backbone> make_vit(const BackboneSpec& spec);  // vit, vit_hybrid, resnet_vit
std::shared_ptr<Backbone> make_tnt(const BackboneSpec& spec);
std::shared_ptr<Backbone> make_swin(const BackboneSpec& spec);
std::shared_ptr<Backbone> make_mobilevit(const BackboneSpec& spec);
std::shared_ptr<Backbone> make_vgg16(const BackboneSpec& spec);
std::shared_ptr<Backbone> make_resnet50(const BackboneSpec& spec);
std::shared_ptr<Backbone> make_efficientnet(const BackboneSpec& spec);

}  // namespace itmainn::model::detail
