#include "builders.hpp"
#include "layers.hpp"

namespace itmainn::model::detail {
namespace {

using namespace layers;

// MobileNetV2 inverted residual.
class InvertedResidualImpl : public torch::nn::Module {
 public:
  InvertedResidualImpl(int64_t in, int64_t out, int64_t stride, int64_t expansion)
      : residual_(stride == 1 && in == out) {
    const int64_t hidden = in * expansion;
    torch::nn::Sequential body;
    if (expansion != 1) body->push_back(ConvNorm(in, hidden, 1, 1, NormKind::kBatch, Act::kSilu));
    body->push_back(ConvNorm(hidden, hidden, 3, stride, NormKind::kBatch, Act::kSilu, hidden));
    body->push_back(ConvNorm(hidden, out, 1, 1, NormKind::kBatch, Act::kNone));
    this->body = register_module("body", body);
  }

  torch::Tensor forward(const torch::Tensor& x) { return residual_ ? x + body->forward(x) : body->forward(x); }

  torch::nn::Sequential body{nullptr};

 private:
  bool residual_;
};
TORCH_MODULE(InvertedResidual);

// Local convolution, global attention over unfolded 2x2 patches, fold back
// and fuse with the input.
class MobileVitBlockImpl : public torch::nn::Module {
 public:
  MobileVitBlockImpl(int64_t channels, int64_t dim, int depth, int64_t heads, int64_t patch) : patch_(patch) {
    local = register_module("local", ConvNorm(channels, channels, 3, 1, NormKind::kBatch, Act::kSilu));
    to_tokens = register_module("to_tokens",
                                torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, dim, 1).bias(false)));
    for (int i = 0; i < depth; ++i) {
      transformer.push_back(register_module("transformer" + std::to_string(i), Block(dim, heads, 2.0, 1e-5)));
    }
    norm = register_module("norm", layer_norm(dim, 1e-5));
    project = register_module("project", ConvNorm(dim, channels, 1, 1, NormKind::kBatch, Act::kSilu));
    fuse = register_module("fuse", ConvNorm(2 * channels, channels, 3, 1, NormKind::kBatch, Act::kSilu));
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto y = to_tokens(local(x));
    const auto b = y.size(0), d = y.size(1), h = y.size(2), w = y.size(3);
    const auto p = patch_;
    const auto nh = (h + p - 1) / p * p, nw = (w + p - 1) / p * p;
    namespace F = torch::nn::functional;
    if (nh != h || nw != w) {
      y = F::interpolate(y, F::InterpolateFuncOptions()
                                .size(std::vector<int64_t>{nh, nw})
                                .mode(torch::kBilinear)
                                .align_corners(false));
    }
    auto tokens = y.reshape({b, d, nh / p, p, nw / p, p}).permute({0, 3, 5, 2, 4, 1}).reshape({b * p * p, -1, d});
    for (auto& blk : transformer) tokens = blk(tokens);
    tokens = norm(tokens);
    y = tokens.reshape({b, p, p, nh / p, nw / p, d}).permute({0, 5, 3, 1, 4, 2}).reshape({b, d, nh, nw});
    if (nh != h || nw != w) {
      y = F::interpolate(y, F::InterpolateFuncOptions()
                                .size(std::vector<int64_t>{h, w})
                                .mode(torch::kBilinear)
                                .align_corners(false));
    }
    return fuse(torch::cat({x, project(y)}, 1));
  }

  ConvNorm local{nullptr}, project{nullptr}, fuse{nullptr};
  torch::nn::Conv2d to_tokens{nullptr};
  std::vector<Block> transformer;
  torch::nn::LayerNorm norm{nullptr};

 private:
  int64_t patch_;
};
TORCH_MODULE(MobileVitBlock);

class MobileVit : public Backbone {
 public:
  explicit MobileVit(const BackboneSpec& spec) {
    const auto& a = spec.arch;
    const auto stem_width = arch_get<int>(a, "stem");
    const auto channels = arch_get<std::vector<int>>(a, "channels");  // layer1..layer5
    const auto dims = arch_get<std::vector<int>>(a, "dims");          // MobileViT blocks in layer3..5
    const auto depths = arch_get<std::vector<int>>(a, "depths");
    const auto heads = a.value("heads", 4);
    const auto expansion = a.value("expansion", 4);
    const auto layer2_blocks = a.value("layer2_blocks", 3);
    top_ = arch_get<int>(a, "top");
    if (channels.size() != 5 || dims.size() != 3 || depths.size() != 3) {
      fail(ErrorKind::kConfigError, "MobileViT expects 5 channel widths and 3 transformer stages");
    }
    stem = register_module("stem", ConvNorm(3, stem_width, 3, 2, NormKind::kBatch, Act::kSilu));
    add_group("stem", {stem.ptr()});

    std::vector<torch::nn::Sequential> layers(5);
    layers[0]->push_back(InvertedResidual(stem_width, channels[0], 1, expansion));
    layers[1]->push_back(InvertedResidual(channels[0], channels[1], 2, expansion));
    for (int i = 1; i < layer2_blocks; ++i) layers[1]->push_back(InvertedResidual(channels[1], channels[1], 1, expansion));
    for (int s = 2; s < 5; ++s) {
      layers[s]->push_back(InvertedResidual(channels[s - 1], channels[s], 2, expansion));
      layers[s]->push_back(MobileVitBlock(channels[s], dims[s - 2], depths[s - 2], heads, 2));
    }
    for (int s = 0; s < 5; ++s) {
      const auto name = "layer" + std::to_string(s + 1);
      stages.push_back(register_module(name, layers[s]));
      add_group(name, {stages.back().ptr()});
    }
    head_conv = register_module("top", ConvNorm(channels[4], top_, 1, 1, NormKind::kBatch, Act::kSilu));
    add_group("top", {head_conv.ptr()});
  }

  torch::Tensor forward(torch::Tensor x) override {
    x = stem(x);
    for (auto& s : stages) x = s->forward(x);
    return head_conv(x).mean({2, 3});
  }

  int feature_dim() const override { return top_; }

  ConvNorm stem{nullptr}, head_conv{nullptr};
  std::vector<torch::nn::Sequential> stages;

 private:
  int top_;
};

}  // namespace

std::shared_ptr<Backbone> make_mobilevit(const BackboneSpec& spec) { return std::make_shared<MobileVit>(spec); }

}  // namespace itmainn::model::detail
