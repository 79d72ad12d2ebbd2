#pragma once

// Building blocks shared by the backbone implementations. Internal header.

#include <cmath>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "itmainn/core/error.hpp"
#include "itmainn/model/backbone.hpp"

namespace itmainn::model::layers {

using ModulePtr = std::shared_ptr<torch::nn::Module>;

template <typename T>
T arch_get(const nlohmann::json& arch, const char* key) {
  if (!arch.contains(key)) fail(ErrorKind::kConfigError, std::string("backbone arch is missing '") + key + "'");
  return arch.at(key).get<T>();
}

inline torch::nn::LayerNorm layer_norm(int64_t dim, double eps) {
  return torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim}).eps(eps));
}

inline void init_small_normal(torch::Tensor& t) {
  torch::NoGradGuard guard;
  t.normal_(0.0, 0.02).clamp_(-0.04, 0.04);
}

class MlpImpl : public torch::nn::Module {
 public:
  MlpImpl(int64_t dim, int64_t hidden) {
    fc1 = register_module("fc1", torch::nn::Linear(dim, hidden));
    fc2 = register_module("fc2", torch::nn::Linear(hidden, dim));
  }
  torch::Tensor forward(const torch::Tensor& x) { return fc2(torch::gelu(fc1(x))); }

  torch::nn::Linear fc1{nullptr}, fc2{nullptr};
};
TORCH_MODULE(Mlp);

// Multi-head self-attention over [B, N, C]. `bias` is added to the logits
// and must broadcast to [B, heads, N, N].
class AttentionImpl : public torch::nn::Module {
 public:
  AttentionImpl(int64_t dim, int64_t heads) : heads_(heads) {
    if (dim % heads != 0) fail(ErrorKind::kConfigError, "attention width must be divisible by the head count");
    scale_ = 1.0 / std::sqrt(static_cast<double>(dim / heads));
    qkv = register_module("qkv", torch::nn::Linear(dim, 3 * dim));
    proj = register_module("proj", torch::nn::Linear(dim, dim));
  }

  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& bias = {}) {
    const auto b = x.size(0), n = x.size(1), c = x.size(2);
    auto parts = qkv(x).reshape({b, n, 3, heads_, c / heads_}).permute({2, 0, 3, 1, 4});
    auto attn = torch::matmul(parts[0], parts[1].transpose(-2, -1)) * scale_;
    if (bias.defined()) attn = attn + bias;
    attn = torch::softmax(attn, -1);
    return proj(torch::matmul(attn, parts[2]).transpose(1, 2).reshape({b, n, c}));
  }

  int64_t heads() const { return heads_; }

  torch::nn::Linear qkv{nullptr}, proj{nullptr};

 private:
  int64_t heads_;
  double scale_;
};
TORCH_MODULE(Attention);

// Pre-norm transformer encoder block.
class BlockImpl : public torch::nn::Module {
 public:
  BlockImpl(int64_t dim, int64_t heads, double mlp_ratio, double eps = 1e-6) {
    norm1 = register_module("norm1", layer_norm(dim, eps));
    attn = register_module("attn", Attention(dim, heads));
    norm2 = register_module("norm2", layer_norm(dim, eps));
    mlp = register_module("mlp", Mlp(dim, static_cast<int64_t>(dim * mlp_ratio)));
  }

  torch::Tensor forward(torch::Tensor x, const torch::Tensor& bias = {}) {
    x = x + attn(norm1(x), bias);
    return x + mlp(norm2(x));
  }

  torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr};
  Attention attn{nullptr};
  Mlp mlp{nullptr};
};
TORCH_MODULE(Block);

// Weight-standardised convolution (BiT).
class StdConv2dImpl : public torch::nn::Module {
 public:
  StdConv2dImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride, int64_t padding)
      : stride_(stride), padding_(padding) {
    weight = register_parameter("weight", torch::empty({out, in, kernel, kernel}));
    torch::nn::init::kaiming_uniform_(weight, std::sqrt(5.0));
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto w = weight;
    const auto mean = w.mean({1, 2, 3}, true);
    const auto var = w.var({1, 2, 3}, false, true);
    w = (w - mean) / torch::sqrt(var + 1e-8);
    return torch::conv2d(x, w, {}, stride_, padding_);
  }

  torch::Tensor weight;

 private:
  int64_t stride_, padding_;
};
TORCH_MODULE(StdConv2d);

enum class NormKind { kBatch, kGroup };
enum class Act { kNone, kRelu, kSilu };

inline NormKind parse_norm(const std::string& text) {
  if (text == "batch") return NormKind::kBatch;
  if (text == "group") return NormKind::kGroup;
  fail(ErrorKind::kConfigError, "unknown norm kind '" + text + "'");
}

inline int64_t group_count(int64_t channels) { return std::gcd<int64_t>(32, channels); }

// conv -> norm -> activation. Group norm pairs with a weight-standardised
// convolution, batch norm with a plain one.
class ConvNormImpl : public torch::nn::Module {
 public:
  ConvNormImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride, NormKind norm, Act act, int64_t groups = 1)
      : act_(act) {
    const int64_t pad = kernel / 2;
    if (norm == NormKind::kGroup) {
      if (groups != 1) fail(ErrorKind::kConfigError, "grouped convolution needs batch norm");
      std_conv = register_module("conv", StdConv2d(in, out, kernel, stride, pad));
      gn = register_module("norm", torch::nn::GroupNorm(group_count(out), out));
    } else {
      conv = register_module(
          "conv", torch::nn::Conv2d(
                      torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(pad).groups(groups).bias(false)));
      bn = register_module("norm", torch::nn::BatchNorm2d(out));
    }
  }

  torch::Tensor forward(torch::Tensor x) {
    x = conv ? bn(conv(x)) : gn(std_conv(x));
    switch (act_) {
      case Act::kRelu: return torch::relu(x);
      case Act::kSilu: return torch::silu(x);
      case Act::kNone: break;
    }
    return x;
  }

  torch::nn::Conv2d conv{nullptr};
  torch::nn::BatchNorm2d bn{nullptr};
  StdConv2d std_conv{nullptr};
  torch::nn::GroupNorm gn{nullptr};

 private:
  Act act_;
};
TORCH_MODULE(ConvNorm);

// ResNet bottleneck, stride on the 3x3 convolution.
class BottleneckImpl : public torch::nn::Module {
 public:
  BottleneckImpl(int64_t in, int64_t mid, int64_t out, int64_t stride, NormKind norm) {
    conv1 = register_module("conv1", ConvNorm(in, mid, 1, 1, norm, Act::kRelu));
    conv2 = register_module("conv2", ConvNorm(mid, mid, 3, stride, norm, Act::kRelu));
    conv3 = register_module("conv3", ConvNorm(mid, out, 1, 1, norm, Act::kNone));
    if (in != out || stride != 1) downsample = register_module("downsample", ConvNorm(in, out, 1, stride, norm, Act::kNone));
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto shortcut = downsample ? downsample(x) : x;
    return torch::relu(conv3(conv2(conv1(x))) + shortcut);
  }

  ConvNorm conv1{nullptr}, conv2{nullptr}, conv3{nullptr}, downsample{nullptr};
};
TORCH_MODULE(Bottleneck);

// ResNet stem (7x7/2 conv + 3x3/2 max pool) followed by bottleneck stages.
// Stage i has width base * 2^i and output 4x that; stage 0 keeps the
// stride, later stages halve the resolution.
struct ResNetTrunk {
  torch::nn::Sequential stem{nullptr};
  std::vector<torch::nn::Sequential> stages;
  int64_t out_channels = 0;
  int64_t stride = 4;

  ResNetTrunk(torch::nn::Module& owner, int64_t stem_width, int64_t base_width, const std::vector<int>& depths,
              NormKind norm) {
    stem = owner.register_module(
        "stem", torch::nn::Sequential(ConvNorm(3, stem_width, 7, 2, norm, Act::kRelu),
                                      torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(3).stride(2).padding(1))));
    int64_t in = stem_width;
    for (std::size_t i = 0; i < depths.size(); ++i) {
      const int64_t mid = base_width << i;
      const int64_t out = mid * 4;
      torch::nn::Sequential stage;
      for (int d = 0; d < depths[i]; ++d) {
        const int64_t s = (d == 0 && i > 0) ? 2 : 1;
        stage->push_back(Bottleneck(d == 0 ? in : out, mid, out, s, norm));
      }
      if (i > 0) stride *= 2;
      stages.push_back(owner.register_module("stage" + std::to_string(i + 1), stage));
      in = out;
    }
    out_channels = in;
  }

  torch::Tensor forward(torch::Tensor x) {
    x = stem->forward(x);
    for (auto& s : stages) x = s->forward(x);
    return x;
  }

  void add_groups(std::vector<std::pair<std::string, std::vector<ModulePtr>>>& groups) const {
    groups.push_back({"stem", {stem.ptr()}});
    for (std::size_t i = 0; i < stages.size(); ++i) groups.push_back({"stage" + std::to_string(i + 1), {stages[i].ptr()}});
  }
};

// Resizes a positional table laid out as a gh x gw grid to a new grid.
inline torch::Tensor resize_grid_embedding(const torch::Tensor& pos, int64_t gh, int64_t gw, int64_t new_h,
                                           int64_t new_w) {
  if (gh == new_h && gw == new_w) return pos;
  const auto dim = pos.size(-1);
  auto grid = pos.reshape({1, gh, gw, dim}).permute({0, 3, 1, 2});
  grid = torch::nn::functional::interpolate(
      grid, torch::nn::functional::InterpolateFuncOptions()
                .size(std::vector<int64_t>{new_h, new_w})
                .mode(torch::kBicubic)
                .align_corners(false));
  return grid.permute({0, 2, 3, 1}).reshape({1, new_h * new_w, dim});
}

}  // namespace itmainn::model::layers
