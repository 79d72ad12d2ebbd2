#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "itmainn/model/bundle.hpp"

namespace itmainn::service {

inline constexpr std::size_t kDefaultMaxUploadBytes = 10u * 1024u * 1024u;

// A loaded bundle; immutable and shared read-only between request threads.
struct Deployment {
  model::ClassifierModel model;
  model::BundleManifest manifest;
  std::string version;  // weights checksum
};

std::shared_ptr<const Deployment> load_deployment(const std::filesystem::path& bundle_dir);

struct Classification {
  std::string prediction;
  double confidence = 0.0;
  std::vector<std::pair<std::string, double>> per_class;  // class_names order
  std::string model_version;
  nlohmann::json to_json() const;
};

// Binary: positive (class_names[1]) iff its score >= threshold. Otherwise the
// argmax with ties to the lower index. Confidence is the winning class score.
Classification decide(const std::vector<double>& scores, const std::vector<std::string>& class_names,
                      model::Task task, double threshold);

// Throws OversizeImage above max_bytes, DecodeError for unreadable bytes.
Classification classify_image(const Deployment& deployment, std::span<const std::uint8_t> bytes, double threshold,
                              std::size_t max_bytes = kDefaultMaxUploadBytes);

}  // namespace itmainn::service
