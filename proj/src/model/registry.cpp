#include "itmainn/model/registry.hpp"

#include <algorithm>
#include <map>

#include "builders.hpp"
#include "itmainn/core/error.hpp"

namespace itmainn::model {

namespace {

using nlohmann::json;

struct Entry {
  std::string display;
  bool transformer;
  std::shared_ptr<Backbone> (*make)(const BackboneSpec&);
};

const std::map<std::string, Entry>& entries() {
  static const std::map<std::string, Entry> table{
      {"vit", {"ViT", true, detail::make_vit}},
      {"tnt", {"TNT", true, detail::make_tnt}},
      {"swin", {"Swin Transformer", true, detail::make_swin}},
      {"mobilevit", {"MobileViT", true, detail::make_mobilevit}},
      {"vit_hybrid", {"ViT Hybrid", true, detail::make_vit}},
      {"resnet_vit", {"ResNetViT", true, detail::make_vit}},
      {"vgg16", {"VGG16", false, detail::make_vgg16}},
      {"resnet50", {"ResNet50", false, detail::make_resnet50}},
      {"efficientnet_b0", {"EfficientNet-B0", false, detail::make_efficientnet}},
  };
  return table;
}

const Entry& entry(const std::string& name) {
  const auto& table = entries();
  auto it = table.find(name);
  if (it == table.end()) fail(ErrorKind::kUnknownBackbone, "unknown backbone '" + name + "'");
  return it->second;
}

augment::PreprocessSpec preprocess_for(int size, const std::string& norm) {
  augment::PreprocessSpec p;
  p.input_size = size;
  if (norm == "imagenet") {
    p.mean = augment::kImageNetMean;
    p.std = augment::kImageNetStd;
  } else if (norm == "unit") {
    p.mean = {0.0, 0.0, 0.0};
    p.std = {1.0, 1.0, 1.0};
  }
  return p;
}

BackboneSpec make_spec(const std::string& name, const std::string& variant, std::string weights, int size,
                       const std::string& norm, int feature_dim, std::string boundary, json arch) {
  BackboneSpec s;
  s.name = name;
  s.variant = variant;
  s.weight_source_id = std::move(weights);
  s.input_size = size;
  s.feature_dim = feature_dim;
  s.freeze_boundary = std::move(boundary);
  s.preprocess = preprocess_for(size, norm);
  s.arch = std::move(arch);
  return s;
}

BackboneSpec base_spec(const std::string& name) {
  const json vit_b{{"patch", 16}, {"dim", 768}, {"depth", 12}, {"heads", 12}, {"mlp_ratio", 4.0}};
  const json bit_stem{{"stem_width", 64}, {"base_width", 64}, {"depths", {3, 4, 9}}, {"norm", "group"}};
  if (name == "vit") {
    return make_spec(name, "base", "google/vit-base-patch16-224", 224, "half", 768, "block10", vit_b);
  }
  if (name == "tnt") {
    return make_spec(name, "base", "timm/tnt_s_patch16_224", 224, "half", 384, "block10",
                     {{"patch", 16}, {"inner_grid", 4}, {"inner_dim", 24}, {"outer_dim", 384}, {"depth", 12},
                      {"inner_heads", 4}, {"outer_heads", 6}, {"mlp_ratio", 4.0}});
  }
  if (name == "swin") {
    return make_spec(name, "base", "microsoft/swin-base-patch4-window7-224", 224, "imagenet", 1024, "block22",
                     {{"patch", 4}, {"embed_dim", 128}, {"depths", {2, 2, 18, 2}}, {"heads", {4, 8, 16, 32}},
                      {"window", 7}});
  }
  if (name == "mobilevit") {
    return make_spec(name, "base", "apple/mobilevit-small", 256, "unit", 640, "layer4",
                     {{"stem", 16}, {"channels", {32, 64, 96, 128, 160}}, {"dims", {144, 192, 240}},
                      {"depths", {2, 4, 3}}, {"heads", 4}, {"expansion", 4}, {"layer2_blocks", 3}, {"top", 640}});
  }
  if (name == "vit_hybrid") {
    json arch = vit_b;
    arch["patch"] = 1;
    arch["stem"] = bit_stem;
    return make_spec(name, "base", "google/vit-hybrid-base-bit-384", 384, "half", 768, "block10", arch);
  }
  if (name == "resnet_vit") {
    json arch = vit_b;
    arch["patch"] = 1;
    arch["stem"] = bit_stem;
    return make_spec(name, "base", "timm/vit_base_r50_s16_224.orig_in21k", 224, "half", 768, "block10", arch);
  }
  if (name == "vgg16") {
    return make_spec(name, "base", "timm/vgg16.tv_in1k", 224, "imagenet", 512, "block5", {{"width_mult", 1.0}});
  }
  if (name == "resnet50") {
    return make_spec(name, "base", "timm/resnet50.a1_in1k", 224, "imagenet", 2048, "stage4",
                     {{"stem_width", 64}, {"base_width", 64}, {"depths", {3, 4, 6, 3}}});
  }
  return make_spec(name, "base", "timm/efficientnet_b0.ra_in1k", 224, "imagenet", 1280, "stage7",
                   {{"width_mult", 1.0}, {"depth_mult", 1.0}});
}

BackboneSpec tiny_spec(const std::string& name) {
  const std::string weights = "seeded/" + name + "-tiny";
  const json vit_t{{"patch", 8}, {"dim", 64}, {"depth", 4}, {"heads", 4}, {"mlp_ratio", 2.0}};
  if (name == "vit") return make_spec(name, "tiny", weights, 32, "half", 64, "block2", vit_t);
  if (name == "tnt") {
    return make_spec(name, "tiny", weights, 32, "half", 64, "block2",
                     {{"patch", 8}, {"inner_grid", 4}, {"inner_dim", 8}, {"outer_dim", 64}, {"depth", 4},
                      {"inner_heads", 2}, {"outer_heads", 4}, {"mlp_ratio", 2.0}});
  }
  if (name == "swin") {
    return make_spec(name, "tiny", weights, 32, "imagenet", 64, "block2",
                     {{"patch", 2}, {"embed_dim", 32}, {"depths", {2, 2}}, {"heads", {2, 4}}, {"window", 4},
                      {"mlp_ratio", 2.0}});
  }
  if (name == "mobilevit") {
    return make_spec(name, "tiny", weights, 32, "unit", 64, "layer4",
                     {{"stem", 8}, {"channels", {8, 16, 24, 32, 40}}, {"dims", {32, 32, 48}}, {"depths", {1, 1, 1}},
                      {"heads", 2}, {"expansion", 2}, {"layer2_blocks", 2}, {"top", 64}});
  }
  if (name == "vit_hybrid" || name == "resnet_vit") {
    json arch = vit_t;
    arch["patch"] = 1;
    arch["stem"] = {{"stem_width", 16}, {"base_width", 8}, {"depths", {1, 1}}, {"norm", "group"}};
    return make_spec(name, "tiny", weights, 32, "half", 64, "block2", arch);
  }
  if (name == "vgg16") return make_spec(name, "tiny", weights, 32, "imagenet", 64, "block5", {{"width_mult", 0.125}});
  if (name == "resnet50") {
    return make_spec(name, "tiny", weights, 32, "imagenet", 128, "stage4",
                     {{"stem_width", 8}, {"base_width", 4}, {"depths", {1, 1, 1, 1}}});
  }
  return make_spec(name, "tiny", weights, 32, "imagenet", 320, "stage7", {{"width_mult", 0.25}, {"depth_mult", 0.34}});
}

// He-normal (fan-out) convolution weights, the reference initialisation of
// the convolutional families. Only matters when no pretrained weights are
// loaded over it.
void init_convolutions(Backbone& backbone) {
  torch::NoGradGuard guard;
  for (auto& m : backbone.modules(false)) {
    if (auto* conv = m->as<torch::nn::Conv2d>()) {
      torch::nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanOut, torch::kReLU);
      if (conv->bias.defined()) conv->bias.zero_();
    }
  }
}

}  // namespace

const std::vector<std::string>& backbone_names() {
  static const std::vector<std::string> names{"vit",        "tnt",        "swin",     "mobilevit",      "vit_hybrid",
                                              "resnet_vit", "vgg16", "resnet50", "efficientnet_b0"};
  return names;
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names{"base", "tiny"};
  return names;
}

bool is_transformer(const std::string& name) { return entry(name).transformer; }

std::string display_name(const std::string& name) {
  auto it = entries().find(name);
  return it == entries().end() ? name : it->second.display;
}

BackboneSpec registry_spec(const std::string& name, const std::string& variant) {
  entry(name);
  if (variant == "base") return base_spec(name);
  if (variant == "tiny") return tiny_spec(name);
  fail(ErrorKind::kInvalidArgument, "unknown backbone variant '" + variant + "' (expected base or tiny)");
}

std::shared_ptr<Backbone> make_backbone(const BackboneSpec& spec) {
  const auto& e = entry(spec.name);
  spec.validate();
  auto backbone = e.make(spec);
  init_convolutions(*backbone);
  if (backbone->feature_dim() != spec.feature_dim) {
    fail(ErrorKind::kConfigError, spec.name + ": network emits " + std::to_string(backbone->feature_dim()) +
                                      " features but the registry declares " + std::to_string(spec.feature_dim));
  }
  if (!backbone->has_group(spec.freeze_boundary)) {
    fail(ErrorKind::kConfigError, spec.name + ": freeze boundary '" + spec.freeze_boundary + "' is not a layer group");
  }
  return backbone;
}

}  // namespace itmainn::model
