#include <cmath>
#include <optional>

#include "builders.hpp"
#include "layers.hpp"

namespace itmainn::model::detail {
namespace {

using namespace layers;

int64_t scaled_width(int64_t channels, double mult) {
  return std::max<int64_t>(1, static_cast<int64_t>(std::lround(channels * mult)));
}

// VGG16 convolutional trunk, global-average pooled.
class Vgg16 : public Backbone {
 public:
  explicit Vgg16(const BackboneSpec& spec) {
    const double mult = spec.arch.value("width_mult", 1.0);
    const std::vector<std::vector<int64_t>> cfg{{64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}};
    int64_t in = 3;
    for (std::size_t b = 0; b < cfg.size(); ++b) {
      torch::nn::Sequential block;
      for (auto c : cfg[b]) {
        const auto out = scaled_width(c, mult);
        block->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1)));
        block->push_back(torch::nn::ReLU());
        in = out;
      }
      block->push_back(torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(2).stride(2)));
      const auto name = "block" + std::to_string(b + 1);
      blocks.push_back(register_module(name, block));
      add_group(name, {blocks.back().ptr()});
    }
    dim_ = static_cast<int>(in);
  }

  torch::Tensor forward(torch::Tensor x) override {
    for (auto& b : blocks) x = b->forward(x);
    return x.mean({2, 3});
  }

  int feature_dim() const override { return dim_; }

  std::vector<torch::nn::Sequential> blocks;

 private:
  int dim_;
};

class ResNet50 : public Backbone {
 public:
  explicit ResNet50(const BackboneSpec& spec) {
    const auto& a = spec.arch;
    trunk_.emplace(*this, arch_get<int>(a, "stem_width"), arch_get<int>(a, "base_width"),
                   arch_get<std::vector<int>>(a, "depths"), NormKind::kBatch);
    std::vector<std::pair<std::string, std::vector<ModulePtr>>> groups;
    trunk_->add_groups(groups);
    for (auto& [name, modules] : groups) add_group(name, modules);
  }

  torch::Tensor forward(torch::Tensor x) override { return trunk_->forward(x).mean({2, 3}); }
  int feature_dim() const override { return static_cast<int>(trunk_->out_channels); }

 private:
  std::optional<ResNetTrunk> trunk_;
};

class SqueezeExciteImpl : public torch::nn::Module {
 public:
  SqueezeExciteImpl(int64_t channels, int64_t reduced) {
    reduce = register_module("reduce", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, reduced, 1)));
    expand = register_module("expand", torch::nn::Conv2d(torch::nn::Conv2dOptions(reduced, channels, 1)));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    auto s = x.mean({2, 3}, true);
    return x * torch::sigmoid(expand(torch::silu(reduce(s))));
  }

  torch::nn::Conv2d reduce{nullptr}, expand{nullptr};
};
TORCH_MODULE(SqueezeExcite);

class MbConvImpl : public torch::nn::Module {
 public:
  MbConvImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride, int64_t expansion)
      : residual_(stride == 1 && in == out) {
    const int64_t hidden = in * expansion;
    torch::nn::Sequential body;
    if (expansion != 1) body->push_back(ConvNorm(in, hidden, 1, 1, NormKind::kBatch, Act::kSilu));
    body->push_back(ConvNorm(hidden, hidden, kernel, stride, NormKind::kBatch, Act::kSilu, hidden));
    body->push_back(SqueezeExcite(hidden, std::max<int64_t>(1, in / 4)));
    body->push_back(ConvNorm(hidden, out, 1, 1, NormKind::kBatch, Act::kNone));
    this->body = register_module("body", body);
  }
  torch::Tensor forward(const torch::Tensor& x) { return residual_ ? x + body->forward(x) : body->forward(x); }

  torch::nn::Sequential body{nullptr};

 private:
  bool residual_;
};
TORCH_MODULE(MbConv);

class EfficientNet : public Backbone {
 public:
  explicit EfficientNet(const BackboneSpec& spec) {
    const double width = spec.arch.value("width_mult", 1.0);
    const double depth = spec.arch.value("depth_mult", 1.0);
    auto filters = [width](int64_t c) {
      const int64_t scaled = static_cast<int64_t>(c * width + 4) / 8 * 8;
      return std::max<int64_t>(8, scaled < 0.9 * c * width ? scaled + 8 : scaled);
    };
    struct StageDef {
      int64_t expansion, kernel, stride, out, repeats;
    };
    const std::vector<StageDef> defs{{1, 3, 1, 16, 1}, {6, 3, 2, 24, 2},  {6, 5, 2, 40, 2}, {6, 3, 2, 80, 3},
                                     {6, 5, 1, 112, 3}, {6, 5, 2, 192, 4}, {6, 3, 1, 320, 1}};
    int64_t in = filters(32);
    stem = register_module("stem", ConvNorm(3, in, 3, 2, NormKind::kBatch, Act::kSilu));
    add_group("stem", {stem.ptr()});
    for (std::size_t s = 0; s < defs.size(); ++s) {
      const auto& d = defs[s];
      const auto out = filters(d.out);
      const auto repeats = static_cast<int64_t>(std::ceil(d.repeats * depth));
      torch::nn::Sequential stage;
      for (int64_t r = 0; r < repeats; ++r) {
        stage->push_back(MbConv(r == 0 ? in : out, out, d.kernel, r == 0 ? d.stride : 1, d.expansion));
      }
      in = out;
      const auto name = "stage" + std::to_string(s + 1);
      stages.push_back(register_module(name, stage));
      add_group(name, {stages.back().ptr()});
    }
    dim_ = static_cast<int>(filters(1280));
    top = register_module("top", ConvNorm(in, dim_, 1, 1, NormKind::kBatch, Act::kSilu));
    add_group("top", {top.ptr()});
  }

  torch::Tensor forward(torch::Tensor x) override {
    x = stem(x);
    for (auto& s : stages) x = s->forward(x);
    return top(x).mean({2, 3});
  }

  int feature_dim() const override { return dim_; }

  ConvNorm stem{nullptr}, top{nullptr};
  std::vector<torch::nn::Sequential> stages;

 private:
  int dim_;
};

}  // namespace

std::shared_ptr<Backbone> make_vgg16(const BackboneSpec& spec) { return std::make_shared<Vgg16>(spec); }
std::shared_ptr<Backbone> make_resnet50(const BackboneSpec& spec) { return std::make_shared<ResNet50>(spec); }
std::shared_ptr<Backbone> make_efficientnet(const BackboneSpec& spec) { return std::make_shared<EfficientNet>(spec); }

}  // namespace itmainn::model::detail
