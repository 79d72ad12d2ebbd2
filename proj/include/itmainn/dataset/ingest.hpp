#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "itmainn/dataset/manifest.hpp"

namespace itmainn::dataset {

struct ClassFolder {
  std::string class_name;
  // Folder under the originals directory.
  std::string folder;
  // Folder under the augmented directory; optional on disk.
  std::string augmented_folder;
};

// On-disk layout: <root>/<original_dir>/<folder>/*.{jpg,jpeg,png} and
// <root>/<augmented_dir>/<augmented_folder>/*. Class order in `classes` fixes
// the label indices.
struct DatasetLayout {
  Task task = Task::kBinary;
  std::string original_dir = "Original Images";
  std::string augmented_dir = "Augmented Images";
  std::vector<ClassFolder> classes;

  nlohmann::json to_json() const;
  static DatasetLayout from_json(const nlohmann::json& doc);
};

// Binary MSLD: "Others" -> class 0, "Monkeypox" -> class 1 (positive).
DatasetLayout msld_layout();
// Six-class MSLD v2.0: MKP, CHP, MSL, CWP, HFMD, Healthy.
DatasetLayout msld_v2_layout();
DatasetLayout default_layout(Task task);

enum class UndecodablePolicy { kFail, kSkipWithWarning };

struct IngestOptions {
  UndecodablePolicy undecodable = UndecodablePolicy::kFail;
  bool include_augmented = true;
  // Full decode of every file. Turning this off only checks extensions.
  bool verify_decode = true;
};

struct IngestReport {
  DatasetManifest manifest;
  std::vector<std::filesystem::path> skipped;
};

IngestReport ingest_dataset(const std::filesystem::path& root, const DatasetLayout& layout,
                            const IngestOptions& options = {});

inline DatasetManifest ingest_dataset(const std::filesystem::path& root, Task task) {
  return ingest_dataset(root, default_layout(task)).manifest;
}

bool has_image_extension(const std::filesystem::path& path);

}  // namespace itmainn::dataset
