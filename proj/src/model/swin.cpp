#include "builders.hpp"
#include "layers.hpp"

namespace itmainn::model::detail {
namespace {

using namespace layers;

torch::Tensor window_partition(const torch::Tensor& x, int64_t w) {
  const auto b = x.size(0), h = x.size(1), wd = x.size(2), c = x.size(3);
  return x.view({b, h / w, w, wd / w, w, c}).permute({0, 1, 3, 2, 4, 5}).reshape({-1, w * w, c});
}

torch::Tensor window_reverse(const torch::Tensor& windows, int64_t w, int64_t b, int64_t h, int64_t wd) {
  const auto c = windows.size(-1);
  return windows.view({b, h / w, wd / w, w, w, c}).permute({0, 1, 3, 2, 4, 5}).reshape({b, h, wd, c});
}

class SwinBlockImpl : public torch::nn::Module {
 public:
  SwinBlockImpl(int64_t dim, int64_t heads, int64_t window, int64_t shift, int64_t height, int64_t width,
                double mlp_ratio)
      : heads_(heads), height_(height), width_(width) {
    if (std::min(height, width) <= window) {
      window = std::min(height, width);
      shift = 0;
    }
    if (height % window != 0 || width % window != 0) {
      fail(ErrorKind::kConfigError, "Swin feature map must be divisible by the window size");
    }
    window_ = window;
    shift_ = shift;
    norm1 = register_module("norm1", layer_norm(dim, 1e-5));
    attn = register_module("attn", Attention(dim, heads));
    norm2 = register_module("norm2", layer_norm(dim, 1e-5));
    mlp = register_module("mlp", Mlp(dim, static_cast<int64_t>(dim * mlp_ratio)));

    const int64_t span = 2 * window - 1;
    bias_table = register_parameter("relative_position_bias_table", torch::zeros({span * span, heads}));
    init_small_normal(bias_table);
    auto coords = torch::stack(torch::meshgrid({torch::arange(window), torch::arange(window)}, "ij")).flatten(1);
    auto rel = coords.unsqueeze(2) - coords.unsqueeze(1);  // [2, N, N]
    relative_index = register_buffer("relative_position_index", (rel[0] + window - 1) * span + (rel[1] + window - 1));

    if (shift_ > 0) {
      auto img = torch::zeros({1, height, width, 1});
      const std::vector<std::pair<int64_t, int64_t>> spans{{0, height - window}, {height - window, height - shift_},
                                                           {height - shift_, height}};
      const std::vector<std::pair<int64_t, int64_t>> wspans{{0, width - window}, {width - window, width - shift_},
                                                            {width - shift_, width}};
      int region = 0;
      for (auto [h0, h1] : spans) {
        for (auto [w0, w1] : wspans) {
          img.slice(1, h0, h1).slice(2, w0, w1).fill_(region++);
        }
      }
      auto windows = window_partition(img, window_).squeeze(-1);  // [nW, N]
      auto diff = windows.unsqueeze(1) - windows.unsqueeze(2);
      attn_mask = register_buffer("attn_mask", torch::zeros_like(diff).masked_fill(diff != 0, -100.0));
    }
  }

  torch::Tensor forward(torch::Tensor x) {
    const auto b = x.size(0), c = x.size(2);
    auto shortcut = x;
    x = norm1(x).view({b, height_, width_, c});
    if (shift_ > 0) x = torch::roll(x, {-shift_, -shift_}, {1, 2});
    auto windows = window_partition(x, window_);
    const auto n = window_ * window_;
    auto bias = bias_table.index_select(0, relative_index.flatten()).view({n, n, heads_}).permute({2, 0, 1});
    auto full = bias.unsqueeze(0);  // [1, h, N, N]
    if (shift_ > 0) full = (full + attn_mask.unsqueeze(1)).repeat({b, 1, 1, 1});
    windows = attn(windows, full);
    x = window_reverse(windows, window_, b, height_, width_);
    if (shift_ > 0) x = torch::roll(x, {shift_, shift_}, {1, 2});
    x = shortcut + x.reshape({b, height_ * width_, c});
    return x + mlp(norm2(x));
  }

  torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr};
  Attention attn{nullptr};
  Mlp mlp{nullptr};
  torch::Tensor bias_table, relative_index, attn_mask;

 private:
  int64_t heads_, height_, width_, window_ = 0, shift_ = 0;
};
TORCH_MODULE(SwinBlock);

class PatchMergingImpl : public torch::nn::Module {
 public:
  PatchMergingImpl(int64_t dim, int64_t height, int64_t width) : height_(height), width_(width) {
    if (height % 2 != 0 || width % 2 != 0) fail(ErrorKind::kConfigError, "patch merging needs an even feature map");
    norm = register_module("norm", layer_norm(4 * dim, 1e-5));
    reduction = register_module("reduction", torch::nn::Linear(torch::nn::LinearOptions(4 * dim, 2 * dim).bias(false)));
  }

  torch::Tensor forward(const torch::Tensor& x) {
    const auto b = x.size(0), c = x.size(2);
    auto g = x.view({b, height_, width_, c});
    using torch::indexing::Slice;
    auto x0 = g.index({Slice(), Slice(0, {}, 2), Slice(0, {}, 2)});
    auto x1 = g.index({Slice(), Slice(1, {}, 2), Slice(0, {}, 2)});
    auto x2 = g.index({Slice(), Slice(0, {}, 2), Slice(1, {}, 2)});
    auto x3 = g.index({Slice(), Slice(1, {}, 2), Slice(1, {}, 2)});
    auto merged = torch::cat({x0, x1, x2, x3}, -1).view({b, -1, 4 * c});
    return reduction(norm(merged));
  }

  torch::nn::LayerNorm norm{nullptr};
  torch::nn::Linear reduction{nullptr};

 private:
  int64_t height_, width_;
};
TORCH_MODULE(PatchMerging);

class PatchEmbedImpl : public torch::nn::Module {
 public:
  PatchEmbedImpl(int64_t patch, int64_t dim) {
    proj = register_module("proj", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, dim, patch).stride(patch)));
    norm = register_module("norm", layer_norm(dim, 1e-5));
  }
  torch::Tensor forward(const torch::Tensor& x) { return norm(proj(x).flatten(2).transpose(1, 2)); }

  torch::nn::Conv2d proj{nullptr};
  torch::nn::LayerNorm norm{nullptr};
};
TORCH_MODULE(PatchEmbed);

class SwinTransformer : public Backbone {
 public:
  explicit SwinTransformer(const BackboneSpec& spec) {
    const auto& a = spec.arch;
    const auto patch = arch_get<int>(a, "patch");
    int64_t dim = arch_get<int>(a, "embed_dim");
    const auto depths = arch_get<std::vector<int>>(a, "depths");
    const auto heads = arch_get<std::vector<int>>(a, "heads");
    const auto window = arch_get<int>(a, "window");
    const auto mlp_ratio = a.value("mlp_ratio", 4.0);
    if (depths.size() != heads.size() || depths.empty()) fail(ErrorKind::kConfigError, "Swin depths/heads mismatch");
    int64_t res = spec.input_size / patch;
    embed = register_module("embed", PatchEmbed(patch, dim));
    add_group("embed", {embed.ptr()});
    int block = 0;
    for (std::size_t s = 0; s < depths.size(); ++s) {
      if (s > 0) {
        merges.push_back(register_module("merge" + std::to_string(s), PatchMerging(dim, res, res)));
        add_group("merge" + std::to_string(s), {merges.back().ptr()});
        dim *= 2;
        res /= 2;
      }
      for (int d = 0; d < depths[s]; ++d, ++block) {
        const int64_t shift = d % 2 == 1 ? window / 2 : 0;
        blocks.push_back(
            register_module("block" + std::to_string(block), SwinBlock(dim, heads[s], window, shift, res, res, mlp_ratio)));
        add_group("block" + std::to_string(block), {blocks.back().ptr()});
      }
      stage_ends_.push_back(block);
    }
    dim_ = dim;
    norm = register_module("norm", layer_norm(dim, 1e-5));
    add_group("norm", {norm.ptr()});
  }

  torch::Tensor forward(torch::Tensor x) override {
    x = embed(x);
    std::size_t merge = 0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      if (merge < merges.size() && static_cast<int>(i) == stage_ends_[merge]) x = merges[merge++](x);
      x = blocks[i](x);
    }
    return norm(x).mean(1);
  }

  int feature_dim() const override { return static_cast<int>(dim_); }

  PatchEmbed embed{nullptr};
  std::vector<PatchMerging> merges;
  std::vector<SwinBlock> blocks;
  torch::nn::LayerNorm norm{nullptr};

 private:
  int64_t dim_ = 0;
  std::vector<int> stage_ends_;
};

}  // namespace

std::shared_ptr<Backbone> make_swin(const BackboneSpec& spec) { return std::make_shared<SwinTransformer>(spec); }

}  // namespace itmainn::model::detail
