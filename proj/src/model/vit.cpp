#include <optional>

#include "builders.hpp"
#include "layers.hpp"

namespace itmainn::model::detail {
namespace {

using namespace layers;

// Patch projection plus class token and positional table.
class TokenEmbedImpl : public torch::nn::Module {
 public:
  TokenEmbedImpl(int64_t in_channels, int64_t dim, int64_t patch, int64_t grid) : grid_(grid) {
    proj = register_module("proj", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, dim, patch).stride(patch)));
    cls_token = register_parameter("cls_token", torch::zeros({1, 1, dim}));
    pos_embed = register_parameter("pos_embed", torch::zeros({1, 1 + grid * grid, dim}));
    init_small_normal(cls_token);
    init_small_normal(pos_embed);
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto tokens = proj(x);
    const auto gh = tokens.size(2), gw = tokens.size(3);
    tokens = tokens.flatten(2).transpose(1, 2);
    auto pos = resize_grid_embedding(pos_embed.slice(1, 1), grid_, grid_, gh, gw);
    tokens = tokens + pos;
    auto cls = (cls_token + pos_embed.slice(1, 0, 1)).expand({tokens.size(0), -1, -1});
    return torch::cat({cls, tokens}, 1);
  }

  torch::nn::Conv2d proj{nullptr};
  torch::Tensor cls_token, pos_embed;

 private:
  int64_t grid_;
};
TORCH_MODULE(TokenEmbed);

// Plain ViT, or a hybrid when arch carries a "stem" section: a ResNet trunk
// produces the feature map that is tokenised instead of raw pixels.
class VisionTransformer : public Backbone {
 public:
  explicit VisionTransformer(const BackboneSpec& spec) {
    const auto& a = spec.arch;
    dim_ = arch_get<int>(a, "dim");
    const auto depth = arch_get<int>(a, "depth");
    const auto heads = arch_get<int>(a, "heads");
    const auto mlp_ratio = a.value("mlp_ratio", 4.0);
    const auto eps = a.value("norm_eps", 1e-6);
    int64_t in_channels = 3, stride = 1, patch;
    std::vector<std::pair<std::string, std::vector<ModulePtr>>> groups;
    if (a.contains("stem")) {
      const auto& s = a.at("stem");
      trunk_.emplace(*this, arch_get<int>(s, "stem_width"), arch_get<int>(s, "base_width"),
                     arch_get<std::vector<int>>(s, "depths"), parse_norm(s.value("norm", std::string("group"))));
      trunk_->add_groups(groups);
      in_channels = trunk_->out_channels;
      stride = trunk_->stride;
      patch = a.value("patch", 1);
    } else {
      patch = arch_get<int>(a, "patch");
    }
    const int64_t grid = spec.input_size / (stride * patch);
    if (grid <= 0) fail(ErrorKind::kConfigError, "input_size too small for the patch size");
    embed = register_module("embed", TokenEmbed(in_channels, dim_, patch, grid));
    groups.push_back({"embed", {embed.ptr()}});
    for (int i = 0; i < depth; ++i) {
      blocks.push_back(register_module("block" + std::to_string(i), Block(dim_, heads, mlp_ratio, eps)));
      groups.push_back({"block" + std::to_string(i), {blocks.back().ptr()}});
    }
    norm = register_module("norm", layer_norm(dim_, eps));
    groups.push_back({"norm", {norm.ptr()}});
    for (auto& [name, modules] : groups) add_group(name, modules);
  }

  torch::Tensor forward(torch::Tensor x) override {
    if (trunk_) x = trunk_->forward(x);
    x = embed(x);
    for (auto& b : blocks) x = b(x);
    return norm(x).select(1, 0);
  }

  int feature_dim() const override { return static_cast<int>(dim_); }

  TokenEmbed embed{nullptr};
  std::vector<Block> blocks;
  torch::nn::LayerNorm norm{nullptr};

 private:
  int64_t dim_;
  std::optional<ResNetTrunk> trunk_;
};

// Pixel-level tokens for TNT: each patch is cut into inner_grid^2 sub-patches
// embedded with a shared projection.
class TntEmbedImpl : public torch::nn::Module {
 public:
  TntEmbedImpl(int64_t patch, int64_t inner_grid, int64_t inner_dim, int64_t outer_dim, int64_t grid)
      : inner_grid_(inner_grid), grid_(grid) {
    if (patch % inner_grid != 0) fail(ErrorKind::kConfigError, "TNT patch must be divisible by inner_grid");
    const int64_t s = patch / inner_grid;
    const int64_t flat = inner_grid * inner_grid * inner_dim;
    pixel_proj = register_module("pixel_proj", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, inner_dim, s).stride(s)));
    inner_pos = register_parameter("inner_pos", torch::zeros({1, inner_grid * inner_grid, inner_dim}));
    norm1 = register_module("norm1", layer_norm(flat, 1e-5));
    proj = register_module("proj", torch::nn::Linear(flat, outer_dim));
    norm2 = register_module("norm2", layer_norm(outer_dim, 1e-5));
    cls_token = register_parameter("cls_token", torch::zeros({1, 1, outer_dim}));
    outer_pos = register_parameter("outer_pos", torch::zeros({1, 1 + grid * grid, outer_dim}));
    init_small_normal(inner_pos);
    init_small_normal(cls_token);
    init_small_normal(outer_pos);
  }

  // Returns (inner [B*Np, ig^2, Di], outer [B, 1+Np, Do]).
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& x) {
    auto pix = pixel_proj(x);  // [B, Di, gh*ig, gw*ig]
    const auto b = pix.size(0), di = pix.size(1);
    const auto gh = pix.size(2) / inner_grid_, gw = pix.size(3) / inner_grid_;
    pix = pix.slice(2, 0, gh * inner_grid_).slice(3, 0, gw * inner_grid_);
    auto inner = pix.reshape({b, di, gh, inner_grid_, gw, inner_grid_})
                     .permute({0, 2, 4, 3, 5, 1})
                     .reshape({b * gh * gw, inner_grid_ * inner_grid_, di});
    inner = inner + inner_pos;
    auto outer = norm2(proj(norm1(inner.reshape({b, gh * gw, -1}))));
    outer = outer + resize_grid_embedding(outer_pos.slice(1, 1), grid_, grid_, gh, gw);
    auto cls = (cls_token + outer_pos.slice(1, 0, 1)).expand({b, -1, -1});
    return {inner, torch::cat({cls, outer}, 1)};
  }

  torch::nn::Conv2d pixel_proj{nullptr};
  torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr};
  torch::nn::Linear proj{nullptr};
  torch::Tensor inner_pos, cls_token, outer_pos;

 private:
  int64_t inner_grid_, grid_;
};
TORCH_MODULE(TntEmbed);

class TntBlockImpl : public torch::nn::Module {
 public:
  TntBlockImpl(int64_t inner_tokens, int64_t inner_dim, int64_t outer_dim, int64_t inner_heads, int64_t outer_heads,
               double mlp_ratio) {
    inner = register_module("inner", Block(inner_dim, inner_heads, 4.0, 1e-5));
    proj_norm = register_module("proj_norm", layer_norm(inner_tokens * inner_dim, 1e-5));
    proj = register_module("proj", torch::nn::Linear(inner_tokens * inner_dim, outer_dim));
    outer = register_module("outer", Block(outer_dim, outer_heads, mlp_ratio, 1e-5));
  }

  std::pair<torch::Tensor, torch::Tensor> forward(torch::Tensor in, torch::Tensor out) {
    in = inner(in);
    const auto b = out.size(0), np = out.size(1) - 1;
    auto flat = proj(proj_norm(in.reshape({b, np, -1})));
    out = torch::cat({out.slice(1, 0, 1), out.slice(1, 1) + flat}, 1);
    return {in, outer(out)};
  }

  Block inner{nullptr}, outer{nullptr};
  torch::nn::LayerNorm proj_norm{nullptr};
  torch::nn::Linear proj{nullptr};
};
TORCH_MODULE(TntBlock);

class TransformerInTransformer : public Backbone {
 public:
  explicit TransformerInTransformer(const BackboneSpec& spec) {
    const auto& a = spec.arch;
    const auto patch = arch_get<int>(a, "patch");
    const auto inner_grid = arch_get<int>(a, "inner_grid");
    const auto inner_dim = arch_get<int>(a, "inner_dim");
    outer_dim_ = arch_get<int>(a, "outer_dim");
    const auto depth = arch_get<int>(a, "depth");
    const int64_t grid = spec.input_size / patch;
    if (grid <= 0) fail(ErrorKind::kConfigError, "input_size too small for the patch size");
    embed = register_module("embed", TntEmbed(patch, inner_grid, inner_dim, outer_dim_, grid));
    add_group("embed", {embed.ptr()});
    for (int i = 0; i < depth; ++i) {
      blocks.push_back(register_module(
          "block" + std::to_string(i),
          TntBlock(inner_grid * inner_grid, inner_dim, outer_dim_, arch_get<int>(a, "inner_heads"),
                   arch_get<int>(a, "outer_heads"), a.value("mlp_ratio", 4.0))));
      add_group("block" + std::to_string(i), {blocks.back().ptr()});
    }
    norm = register_module("norm", layer_norm(outer_dim_, 1e-5));
    add_group("norm", {norm.ptr()});
  }

  torch::Tensor forward(torch::Tensor x) override {
    auto [inner, outer] = embed(x);
    for (auto& b : blocks) std::tie(inner, outer) = b(inner, outer);
    return norm(outer).select(1, 0);
  }

  int feature_dim() const override { return static_cast<int>(outer_dim_); }

  TntEmbed embed{nullptr};
  std::vector<TntBlock> blocks;
  torch::nn::LayerNorm norm{nullptr};

 private:
  int64_t outer_dim_;
};

}  // namespace

std::shared_ptr<Backbone> make_vit(const BackboneSpec& spec) { return std::make_shared<VisionTransformer>(spec); }
std::shared_ptr<Backbone> make_tnt(const BackboneSpec& spec) {
  return std::make_shared<TransformerInTransformer>(spec);
}

}  // namespace itmainn::model::detail
