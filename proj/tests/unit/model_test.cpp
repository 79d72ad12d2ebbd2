#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "itmainn/augment/preprocess.hpp"
#include "itmainn/core/error.hpp"
#include "itmainn/core/io.hpp"
#include "itmainn/model/bundle.hpp"
#include "itmainn/model/classifier.hpp"
#include "itmainn/model/registry.hpp"

namespace itmainn::model {
namespace {

namespace fs = std::filesystem;

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kInvalidArgument;
}

ClassifierModel tiny_model(const std::string& name, Task task, std::uint64_t seed = 1) {
  SeededInitProvider weights;
  return build_model(registry_spec(name, "tiny"), HeadSpec::for_task(task), weights, seed);
}

torch::Tensor random_images(int n, int size, std::uint64_t seed) {
  torch::manual_seed(seed);
  return torch::randn({n, 3, size, size});
}

std::vector<augment::NormalizedImage> shape_images(int n, const augment::PreprocessSpec& spec) {
  std::vector<augment::NormalizedImage> out;
  for (int i = 0; i < n; ++i) out.push_back(augment::preprocess(itmainn::testing::make_shape_image(i % 2, 40, i), spec));
  return out;
}

TEST(Registry, NineBackbonesInOrder) {
  EXPECT_EQ(backbone_names().size(), 9u);
  EXPECT_EQ(display_name("mobilevit"), "MobileViT");
  EXPECT_EQ(display_name("resnet_vit"), "ResNetViT");
  EXPECT_TRUE(is_transformer("swin"));
  EXPECT_FALSE(is_transformer("vgg16"));
}

TEST(Registry, UnknownNamesAreRejected) {
  EXPECT_EQ(kind_of([] { registry_spec("resnext"); }), ErrorKind::kUnknownBackbone);
  auto spec = registry_spec("vit", "tiny");
  spec.name = "resnext";
  EXPECT_EQ(kind_of([&] { make_backbone(spec); }), ErrorKind::kUnknownBackbone);
  EXPECT_EQ(kind_of([] { registry_spec("vit", "huge"); }), ErrorKind::kInvalidArgument);
}

TEST(Registry, TinyVariantsForwardAndDeclareTheirWidth) {
  for (const auto& name : backbone_names()) {
    const auto spec = registry_spec(name, "tiny");
    auto net = make_backbone(spec);
    net->eval();
    torch::NoGradGuard guard;
    const auto features = net->forward(random_images(2, spec.input_size, 3));
    ASSERT_EQ(features.sizes(), (std::vector<int64_t>{2, spec.feature_dim})) << name;
    EXPECT_TRUE(torch::isfinite(features).all().item<bool>()) << name;
  }
}

TEST(Registry, BaseVariantsMatchPublishedWidths) {
  const std::map<std::string, int> widths{{"vit", 768},        {"tnt", 384},        {"swin", 1024},
                                          {"mobilevit", 640},  {"vit_hybrid", 768}, {"resnet_vit", 768},
                                          {"vgg16", 512},      {"resnet50", 2048},  {"efficientnet_b0", 1280}};
  for (const auto& name : backbone_names()) {
    const auto spec = registry_spec(name, "base");
    EXPECT_EQ(spec.feature_dim, widths.at(name));
    auto net = make_backbone(spec);
    net->eval();
    torch::NoGradGuard guard;
    const auto features = net->forward(random_images(1, spec.input_size, 4));
    EXPECT_EQ(features.size(1), widths.at(name)) << name;
  }
}

TEST(Registry, SpecJsonRoundTrip) {
  const auto spec = registry_spec("swin", "base");
  const auto back = BackboneSpec::from_json(spec.to_json());
  EXPECT_EQ(back.to_json(), spec.to_json());
  const auto head = HeadSpec::for_task(Task::kMulticlass);
  EXPECT_EQ(HeadSpec::from_json(head.to_json()).to_json(), head.to_json());
}

TEST(Head, TaskInvariants) {
  auto head = HeadSpec::for_task(Task::kBinary);
  EXPECT_EQ(head.output_dim, 1);
  EXPECT_EQ(head.output_activation, Activation::kSigmoid);
  head.output_dim = 2;
  EXPECT_THROW(head.validate(), Error);
  auto multi = HeadSpec::for_task(Task::kMulticlass);
  EXPECT_EQ(multi.output_dim, 6);
  multi.output_activation = Activation::kSigmoid;
  EXPECT_THROW(multi.validate(), Error);
}

TEST(Classifier, BinaryOutputsAreProbabilities) {
  auto model = tiny_model("vit", Task::kBinary);
  torch::NoGradGuard guard;
  const auto probs = model.probabilities(random_images(16, 32, 5));
  ASSERT_EQ(probs.size(1), 2);
  const auto p = probs.select(1, 1);
  EXPECT_TRUE((p > 0).all().item<bool>());
  EXPECT_TRUE((p < 1).all().item<bool>());
  EXPECT_TRUE(torch::allclose(probs.sum(1), torch::ones({16}, torch::kFloat64), 0, 1e-12));
}

TEST(Classifier, MulticlassOutputsSumToOne) {
  auto model = tiny_model("mobilevit", Task::kMulticlass);
  torch::NoGradGuard guard;
  const auto probs = model.probabilities(random_images(16, 32, 6));
  ASSERT_EQ(probs.size(1), 6);
  EXPECT_TRUE((probs >= 0).all().item<bool>());
  EXPECT_LE((probs.sum(1) - 1.0).abs().max().item<double>(), 1e-6);
}

TEST(Classifier, SeededHeadInitIsReproducible) {
  auto a = tiny_model("resnet50", Task::kBinary, 7);
  auto b = tiny_model("resnet50", Task::kBinary, 7);
  auto c = tiny_model("resnet50", Task::kBinary, 8);
  const auto pa = a.net()->head->parameters();
  const auto pb = b.net()->head->parameters();
  const auto pc = c.net()->head->parameters();
  ASSERT_EQ(pa.size(), pb.size());
  bool any_different = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_TRUE(torch::equal(pa[i], pb[i]));
    any_different |= !torch::equal(pa[i], pc[i]);
  }
  EXPECT_TRUE(any_different);
}

TEST(Classifier, FrozenMaskFollowsTheBoundary) {
  for (const auto& name : backbone_names()) {
    auto model = tiny_model(name, Task::kBinary);
    const auto& groups = model.net()->backbone->layer_groups();
    std::set<const void*> before, grouped;
    bool past = false;
    for (const auto& g : groups) {
      past |= g.name == model.backbone_spec().freeze_boundary;
      for (auto& p : g.parameters()) {
        EXPECT_TRUE(grouped.insert(p.unsafeGetTensorImpl()).second) << name << ": parameter in two groups";
        if (!past) before.insert(p.unsafeGetTensorImpl());
      }
    }
    // Every backbone parameter sits in exactly one group.
    EXPECT_EQ(grouped.size(), model.net()->backbone->parameters().size()) << name;
    EXPECT_FALSE(before.empty()) << name;

    auto params = model.net()->named_parameters();
    std::size_t frozen = 0;
    for (const auto& [pname, is_frozen] : model.frozen_mask()) {
      const auto& t = params[pname];
      EXPECT_EQ(is_frozen, before.count(t.unsafeGetTensorImpl()) > 0) << name << " " << pname;
      EXPECT_EQ(is_frozen, !t.requires_grad()) << name << " " << pname;
      if (pname.rfind("head.", 0) == 0) EXPECT_FALSE(is_frozen);
      frozen += is_frozen;
    }
    EXPECT_EQ(frozen, before.size()) << name;
    EXPECT_EQ(model.trainable_parameters().size(), params.size() - frozen) << name;
  }
}

TEST(Classifier, FrozenGroupsStayInEvalMode) {
  auto model = tiny_model("resnet50", Task::kBinary);
  model.set_training(true);
  const auto& groups = model.net()->backbone->layer_groups();
  EXPECT_FALSE(groups.front().modules.front()->is_training());
  EXPECT_TRUE(groups.back().modules.front()->is_training());
  EXPECT_TRUE(model.net()->head->is_training());
  model.set_training(false);
  EXPECT_FALSE(model.net()->head->is_training());
}

TEST(Classifier, IncompatibleHead) {
  SeededInitProvider weights;
  auto head = HeadSpec::for_task(Task::kBinary);
  head.input_dim = 10;
  EXPECT_EQ(kind_of([&] { build_model(registry_spec("vit", "tiny"), head, weights, 1); }),
            ErrorKind::kIncompatibleHead);
  head.input_dim = 64;
  EXPECT_NO_THROW(build_model(registry_spec("vit", "tiny"), head, weights, 1));
}

TEST(Classifier, SnapshotRestore) {
  auto model = tiny_model("vit", Task::kBinary);
  const auto images = random_images(4, 32, 9);
  torch::NoGradGuard guard;
  const auto before = model.probabilities(images);
  const auto state = model.snapshot();
  for (auto& p : model.net()->parameters()) p.add_(0.1);
  EXPECT_FALSE(torch::equal(before, model.probabilities(images)));
  model.restore(state);
  EXPECT_TRUE(torch::equal(before, model.probabilities(images)));
}

TEST(Weights, LocalCacheRoundTripAndFailures) {
  itmainn::testing::TempDir dir;
  const auto spec = registry_spec("efficientnet_b0", "tiny");
  auto source = tiny_model("efficientnet_b0", Task::kBinary, 11);
  LocalCacheProvider cache(dir.path());
  save_backbone_weights(*source.net()->backbone, cache.path_for(spec.weight_source_id));

  auto loaded = build_model(spec, HeadSpec::for_task(Task::kBinary), cache, 99);
  const auto a = source.net()->backbone->parameters();
  const auto b = loaded.net()->backbone->parameters();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(torch::equal(a[i], b[i]));

  LocalCacheProvider empty(dir.path() / "nothing");
  EXPECT_EQ(kind_of([&] { build_model(spec, HeadSpec::for_task(Task::kBinary), empty, 1); }),
            ErrorKind::kWeightFetchFailure);

  write_file(fs::path(cache.path_for(spec.weight_source_id).string() + ".sha256"), std::string(64, '0'));
  EXPECT_EQ(kind_of([&] { build_model(spec, HeadSpec::for_task(Task::kBinary), cache, 1); }),
            ErrorKind::kWeightFetchFailure);

  // Weights for another architecture do not load.
  auto vgg = tiny_model("vgg16", Task::kBinary);
  BackboneSpec mislabeled = spec;
  save_backbone_weights(*vgg.net()->backbone, cache.path_for("other"));
  mislabeled.weight_source_id = "other";
  EXPECT_EQ(kind_of([&] { build_model(mislabeled, HeadSpec::for_task(Task::kBinary), cache, 1); }),
            ErrorKind::kWeightFetchFailure);
}

TEST(Bundle, RoundTripReproducesPredictions) {
  itmainn::testing::TempDir dir;
  for (auto task : {Task::kBinary, Task::kMulticlass}) {
    auto model = tiny_model("mobilevit", task, 5);
    model.set_trained_epochs(3);
    eval::MetricReport metrics;
    metrics.accuracy = 0.9;
    const auto out = dir.path() / std::string(dataset::to_string(task)) / "bundle";
    const auto manifest = export_bundle(model, metrics, out);
    EXPECT_TRUE(fs::exists(out / "manifest.json"));
    EXPECT_TRUE(fs::exists(out / "weights.bin"));
    EXPECT_TRUE(fs::exists(out / "checksum.sha256"));
    EXPECT_EQ(manifest.class_names, default_class_names(task));

    const auto read = read_bundle_manifest(out);
    EXPECT_EQ(read.task(), task);
    EXPECT_EQ(read.schema_version, 1);
    EXPECT_EQ(read.trained_epochs, 3);
    EXPECT_DOUBLE_EQ(read.metrics.accuracy, 0.9);

    auto loaded = load_bundle(out);
    const auto images = shape_images(10, model.backbone_spec().preprocess);
    const auto a = model.predict(images);
    const auto b = loaded.predict(images);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t c = 0; c < a[i].size(); ++c) EXPECT_NEAR(a[i][c], b[i][c], 1e-6);
    }
  }
}

TEST(Bundle, BinaryManifestContract) {
  itmainn::testing::TempDir dir;
  auto model = tiny_model("mobilevit", Task::kBinary);
  model.set_trained_epochs(1);
  export_bundle(model, {}, dir.path() / "b");
  const auto doc = load_json_file(dir.path() / "b" / "manifest.json");
  EXPECT_EQ(doc.at("task"), "binary");
  EXPECT_EQ(doc.at("class_names"), (nlohmann::json{"Other", "Monkeypox"}));
  EXPECT_EQ(doc.at("backbone").at("name"), "mobilevit");
  EXPECT_TRUE(doc.contains("created_at"));
  EXPECT_TRUE(doc.contains("preprocess"));
}

TEST(Bundle, Failures) {
  itmainn::testing::TempDir dir;
  auto model = tiny_model("vit", Task::kBinary);
  EXPECT_EQ(kind_of([&] { export_bundle(model, {}, dir.path() / "x"); }), ErrorKind::kUntrainedModel);
  model.set_trained_epochs(1);

  // A regular file where a directory is needed: unwritable even as root.
  write_file(dir.path() / "plain", std::string("x"));
  EXPECT_EQ(kind_of([&] { export_bundle(model, {}, dir.path() / "plain" / "bundle"); }), ErrorKind::kWriteFailure);

  const auto out = dir.path() / "bundle";
  export_bundle(model, {}, out);
  auto blob = read_file_bytes(out / "weights.bin");
  blob[blob.size() / 2] ^= 0x01;
  write_file(out / "weights.bin", blob);
  EXPECT_EQ(kind_of([&] { load_bundle(out); }), ErrorKind::kChecksumMismatch);

  export_bundle(model, {}, out);
  auto doc = load_json_file(out / "manifest.json");
  doc["schema_version"] = 99;
  save_json_file(out / "manifest.json", doc);
  EXPECT_EQ(kind_of([&] { load_bundle(out); }), ErrorKind::kSchemaVersionUnsupported);
}

}  // namespace
}  // namespace itmainn::model
