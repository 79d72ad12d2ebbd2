#include "itmainn/model/classifier.hpp"

#include <algorithm>
#include <cstring>

#include "itmainn/core/error.hpp"
#include "itmainn/core/random.hpp"
#include "itmainn/model/registry.hpp"

namespace itmainn::model {

std::mutex& torch_rng_mutex() {
  static std::mutex m;
  return m;
}

ClassifierHeadImpl::ClassifierHeadImpl(int input_dim, const HeadSpec& spec) {
  torch::nn::Sequential seq;
  int64_t in = input_dim;
  for (int h : spec.hidden_dims) {
    seq->push_back(torch::nn::Linear(in, h));
    seq->push_back(torch::nn::ReLU());
    seq->push_back(torch::nn::Dropout(spec.dropout_rate));
    in = h;
  }
  if (spec.hidden_dims.empty()) seq->push_back(torch::nn::Dropout(spec.dropout_rate));
  seq->push_back(torch::nn::Linear(in, spec.output_dim));
  layers = register_module("layers", seq);
}

torch::Tensor ClassifierHeadImpl::forward(torch::Tensor features) { return layers->forward(features); }

ClassifierNetImpl::ClassifierNetImpl(std::shared_ptr<Backbone> backbone_in, ClassifierHead head_in)
    : backbone(std::move(backbone_in)), head(std::move(head_in)) {
  register_module("backbone", backbone);
  register_module("head", head);
}

torch::Tensor ClassifierNetImpl::forward(torch::Tensor images) { return head(backbone->forward(images)); }

ClassifierModel::ClassifierModel(BackboneSpec backbone_spec, HeadSpec head_spec, std::vector<std::string> class_names,
                                 std::shared_ptr<Backbone> backbone, ClassifierHead head)
    : backbone_spec_(std::move(backbone_spec)),
      head_spec_(std::move(head_spec)),
      class_names_(std::move(class_names)),
      net_(ClassifierNet(std::move(backbone), std::move(head))) {
  if (class_names_.size() != static_cast<std::size_t>(head_spec_.num_classes())) {
    fail(ErrorKind::kInvalidArgument, "class_names has " + std::to_string(class_names_.size()) + " entries, head expects " +
                                          std::to_string(head_spec_.num_classes()));
  }
  apply_freeze();
}

void ClassifierModel::apply_freeze() {
  const auto& groups = net_->backbone->layer_groups();
  auto boundary = std::find_if(groups.begin(), groups.end(),
                               [&](const LayerGroup& g) { return g.name == backbone_spec_.freeze_boundary; });
  if (boundary == groups.end()) {
    fail(ErrorKind::kConfigError, "freeze boundary '" + backbone_spec_.freeze_boundary + "' is not a layer group");
  }
  for (auto it = groups.begin(); it != boundary; ++it) {
    for (const auto& m : it->modules) {
      frozen_modules_.push_back(m);
      for (auto& p : m->parameters()) {
        p.set_requires_grad(false);
        frozen_params_.insert(p.unsafeGetTensorImpl());
      }
    }
  }
}

torch::Tensor ClassifierModel::logits(const torch::Tensor& images) const { return net_.ptr()->forward(images); }

torch::Tensor ClassifierModel::probabilities(const torch::Tensor& images) const {
  auto z = logits(images).to(torch::kFloat64);
  if (task() == Task::kBinary) {
    auto p = torch::sigmoid(z);
    return torch::cat({1.0 - p, p}, 1);
  }
  return torch::softmax(z, 1);
}

std::vector<std::vector<double>> ClassifierModel::predict(const std::vector<augment::NormalizedImage>& images) const {
  std::vector<std::vector<double>> out;
  if (images.empty()) return out;
  torch::NoGradGuard guard;
  auto probs = probabilities(to_batch(images)).contiguous();
  const auto n = probs.size(0), c = probs.size(1);
  const double* data = probs.data_ptr<double>();
  for (int64_t i = 0; i < n; ++i) out.emplace_back(data + i * c, data + (i + 1) * c);
  return out;
}

void ClassifierModel::set_training(bool training) {
  net_->train(training);
  if (training) {
    for (auto& m : frozen_modules_) m->eval();
  }
}

std::vector<torch::Tensor> ClassifierModel::trainable_parameters() const {
  std::vector<torch::Tensor> out;
  for (auto& p : net_->parameters()) {
    if (!frozen_params_.count(p.unsafeGetTensorImpl())) out.push_back(p);
  }
  return out;
}

void ClassifierModel::set_dropout(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) fail(ErrorKind::kInvalidArgument, "dropout_rate must be in [0, 1)");
  for (auto& m : net_->head->modules(false)) {
    if (auto* d = m->as<torch::nn::Dropout>()) d->options.p(rate);
  }
  head_spec_.dropout_rate = rate;
}

std::vector<std::pair<std::string, bool>> ClassifierModel::frozen_mask() const {
  std::vector<std::pair<std::string, bool>> out;
  for (auto& item : net_->named_parameters()) {
    out.emplace_back(item.key(), frozen_params_.count(item.value().unsafeGetTensorImpl()) > 0);
  }
  return out;
}

ModelState ClassifierModel::snapshot() const {
  torch::NoGradGuard guard;
  ModelState state;
  for (auto& item : net_->named_parameters()) state.emplace_back(item.key(), item.value().detach().clone());
  for (auto& item : net_->named_buffers()) state.emplace_back(item.key(), item.value().detach().clone());
  return state;
}

void ClassifierModel::restore(const ModelState& state) {
  torch::NoGradGuard guard;
  auto params = net_->named_parameters();
  auto buffers = net_->named_buffers();
  for (const auto& [name, value] : state) {
    if (auto* p = params.find(name)) {
      p->copy_(value);
    } else if (auto* b = buffers.find(name)) {
      b->copy_(value);
    } else {
      fail(ErrorKind::kInvalidArgument, "snapshot entry '" + name + "' does not belong to this model");
    }
  }
}

torch::Tensor to_batch(const std::vector<augment::NormalizedImage>& images) {
  if (images.empty()) fail(ErrorKind::kEmptyBatch, "no images to batch");
  const int s = images.front().size();
  auto batch = torch::empty({static_cast<int64_t>(images.size()), 3, s, s}, torch::kFloat32);
  float* dst = batch.data_ptr<float>();
  const std::size_t per = static_cast<std::size_t>(3) * s * s;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].size() != s) fail(ErrorKind::kInvalidArgument, "images in a batch must share one size");
    const auto chw = images[i].to_chw();
    std::memcpy(dst + i * per, chw.data(), per * sizeof(float));
  }
  return batch;
}

std::vector<std::string> default_class_names(Task task) {
  if (task == Task::kBinary) return {"Other", "Monkeypox"};
  return {"Monkeypox", "Chickenpox", "Measles", "Cowpox", "HFMD", "Healthy"};
}

ClassifierModel build_model(const BackboneSpec& backbone_spec, const HeadSpec& head_spec, WeightProvider& weights,
                            std::uint64_t seed, std::vector<std::string> class_names) {
  head_spec.validate();
  if (class_names.empty()) class_names = default_class_names(head_spec.task);
  std::lock_guard lock(torch_rng_mutex());
  torch::manual_seed(derive_seed(seed, "backbone/" + backbone_spec.name));
  auto backbone = make_backbone(backbone_spec);
  weights.load(backbone_spec, *backbone);
  if (head_spec.input_dim != 0 && head_spec.input_dim != backbone->feature_dim()) {
    fail(ErrorKind::kIncompatibleHead, "head expects " + std::to_string(head_spec.input_dim) + " features, " +
                                           backbone_spec.name + " emits " + std::to_string(backbone->feature_dim()));
  }
  torch::manual_seed(derive_seed(seed, "head"));
  ClassifierHead head(backbone->feature_dim(), head_spec);
  ClassifierModel model(backbone_spec, head_spec, std::move(class_names), std::move(backbone), std::move(head));
  model.set_training(false);
  return model;
}

}  // namespace itmainn::model
