#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "itmainn/eval/metrics.hpp"
#include "itmainn/model/classifier.hpp"

namespace itmainn::model {

inline constexpr int kBundleSchemaVersion = 1;
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kWeightsFile = "weights.bin";
inline constexpr const char* kChecksumFile = "checksum.sha256";

struct BundleManifest {
  int schema_version = kBundleSchemaVersion;
  BackboneSpec backbone;
  HeadSpec head;
  std::vector<std::string> class_names;
  eval::MetricReport metrics;
  std::string created_at;
  int trained_epochs = 0;

  Task task() const { return head.task; }
  nlohmann::json to_json() const;
  static BundleManifest from_json(const nlohmann::json& doc);
};

// Writes <out>/manifest.json, weights.bin and checksum.sha256. Throws
// UntrainedModel, WriteFailure.
BundleManifest export_bundle(const ClassifierModel& model, const eval::MetricReport& metrics,
                             const std::filesystem::path& out);

// Throws SchemaVersionUnsupported, ChecksumMismatch (checked before any
// weight is read), IoError for an incomplete directory.
BundleManifest read_bundle_manifest(const std::filesystem::path& dir);
// Builds the declared architecture and loads a whole-network archive (the
// weights.bin or checkpoint.pt format). Throws IncompatibleHead.
ClassifierModel instantiate_model(const BackboneSpec& backbone, const HeadSpec& head,
                                  std::vector<std::string> class_names, std::span<const std::uint8_t> weights);

ClassifierModel load_bundle(const std::filesystem::path& dir);

}  // namespace itmainn::model
