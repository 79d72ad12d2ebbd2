#include "itmainn/model/bundle.hpp"

#include <sstream>

#include "itmainn/core/error.hpp"
#include "itmainn/core/io.hpp"
#include "itmainn/model/registry.hpp"

namespace itmainn::model {

namespace fs = std::filesystem;

nlohmann::json BundleManifest::to_json() const {
  return {{"schema_version", schema_version},
          {"task", dataset::to_string(head.task)},
          {"backbone", backbone.to_json()},
          {"head", head.to_json()},
          {"class_names", class_names},
          {"preprocess", backbone.preprocess.to_json()},
          {"metrics", metrics.to_json()},
          {"created_at", created_at},
          {"trained_epochs", trained_epochs}};
}

BundleManifest BundleManifest::from_json(const nlohmann::json& doc) {
  BundleManifest m;
  if (!doc.is_object() || !doc.contains("schema_version") || !doc.at("schema_version").is_number_integer()) {
    fail(ErrorKind::kConfigError, "bundle manifest has no schema_version");
  }
  m.schema_version = doc.at("schema_version").get<int>();
  if (m.schema_version != kBundleSchemaVersion) {
    fail(ErrorKind::kSchemaVersionUnsupported, "bundle schema_version " + std::to_string(m.schema_version) +
                                                   " is not supported (expected " +
                                                   std::to_string(kBundleSchemaVersion) + ")");
  }
  try {
    m.backbone = BackboneSpec::from_json(doc.at("backbone"));
    m.head = HeadSpec::from_json(doc.at("head"));
    m.class_names = doc.at("class_names").get<std::vector<std::string>>();
    if (doc.contains("metrics")) m.metrics = eval::MetricReport::from_json(doc.at("metrics"));
    m.created_at = doc.value("created_at", std::string());
    m.trained_epochs = doc.value("trained_epochs", 0);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfigError, std::string("malformed bundle manifest: ") + e.what());
  }
  if (m.class_names.empty()) fail(ErrorKind::kConfigError, "bundle manifest has no class names");
  return m;
}

BundleManifest export_bundle(const ClassifierModel& model, const eval::MetricReport& metrics, const fs::path& out) {
  if (model.trained_epochs() <= 0) fail(ErrorKind::kUntrainedModel, "model has no completed training epoch");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) fail(ErrorKind::kWriteFailure, "cannot create bundle directory " + out.string());

  torch::serialize::OutputArchive archive;
  model.net()->save(archive);
  std::ostringstream blob_stream;
  archive.save_to(blob_stream);
  const std::string blob = blob_stream.str();

  BundleManifest manifest;
  manifest.backbone = model.backbone_spec();
  manifest.head = model.head_spec();
  manifest.class_names = model.class_names();
  manifest.metrics = metrics;
  manifest.created_at = format_utc(std::chrono::system_clock::now());
  manifest.trained_epochs = model.trained_epochs();

  write_file(out / kWeightsFile, blob);
  write_file(out / kChecksumFile, sha256_hex(blob) + "  " + kWeightsFile + "\n");
  write_file(out / kManifestFile, manifest.to_json().dump(2) + "\n");
  return manifest;
}

ClassifierModel instantiate_model(const BackboneSpec& backbone_spec, const HeadSpec& head_spec,
                                  std::vector<std::string> class_names, std::span<const std::uint8_t> weights) {
  std::shared_ptr<Backbone> backbone;
  ClassifierHead head{nullptr};
  {
    std::lock_guard lock(torch_rng_mutex());
    backbone = make_backbone(backbone_spec);
    head = ClassifierHead(backbone->feature_dim(), head_spec);
  }
  ClassifierModel model(backbone_spec, head_spec, std::move(class_names), std::move(backbone), std::move(head));
  try {
    torch::serialize::InputArchive archive;
    archive.load_from(reinterpret_cast<const char*>(weights.data()), weights.size());
    model.net()->load(archive);
  } catch (const c10::Error& e) {
    fail(ErrorKind::kIncompatibleHead, "weights do not fit the declared architecture: " +
                                           std::string(e.what_without_backtrace()));
  }
  model.set_training(false);
  return model;
}

BundleManifest read_bundle_manifest(const fs::path& dir) { return BundleManifest::from_json(load_json_file(dir / kManifestFile)); }

ClassifierModel load_bundle(const fs::path& dir) {
  const auto manifest = read_bundle_manifest(dir);
  const Bytes blob = read_file_bytes(dir / kWeightsFile);
  std::istringstream checksum(read_file_text(dir / kChecksumFile));
  std::string expected;
  checksum >> expected;
  const std::string actual = sha256_hex(blob);
  if (expected != actual) {
    fail(ErrorKind::kChecksumMismatch, "weights digest " + actual + " does not match " + expected);
  }

  auto model = instantiate_model(manifest.backbone, manifest.head, manifest.class_names, blob);
  model.set_trained_epochs(manifest.trained_epochs);
  model.set_training(false);
  return model;
}

}  // namespace itmainn::model
