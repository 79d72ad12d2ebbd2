#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace itmainn::dataset {

enum class Task { kBinary, kMulticlass };
enum class Origin { kOriginal, kAugmented };

std::string_view to_string(Task task);
Task parse_task(std::string_view text);
std::string_view to_string(Origin origin);
Origin parse_origin(std::string_view text);

// Number of classes each task must declare.
constexpr std::size_t kBinaryClassCount = 2;
constexpr std::size_t kMulticlassClassCount = 6;
std::size_t expected_class_count(Task task);

struct LabeledImage {
  std::string id;
  std::filesystem::path path;
  int class_label = 0;
  Origin origin = Origin::kOriginal;
  // Id of the original an augmented image was derived from; empty when
  // unknown (e.g. augmentations shipped with the public release).
  std::string source_id;

  bool operator==(const LabeledImage&) const = default;
};

// Validated enumeration of a dataset. Construction checks the class-count and
// label invariants and derives the per-class counts.
class DatasetManifest {
 public:
  DatasetManifest() = default;
  DatasetManifest(Task task, std::vector<std::string> class_names, std::vector<LabeledImage> images);

  Task task() const { return task_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  std::size_t num_classes() const { return class_names_.size(); }
  const std::vector<LabeledImage>& images() const { return images_; }
  std::size_t size() const { return images_.size(); }

  // Per-class totals over all images.
  const std::vector<std::size_t>& counts() const { return counts_; }
  std::vector<std::size_t> counts(Origin origin) const;

  // Index of the class with this name; throws InvalidArgument if absent.
  int class_index(std::string_view name) const;

  // Manifest restricted to one origin (same classes).
  DatasetManifest filter(Origin origin) const;
  // Manifest with extra images appended (e.g. augmentation output).
  DatasetManifest with_images(const std::vector<LabeledImage>& extra) const;

  const LabeledImage& find(std::string_view id) const;
  std::vector<LabeledImage> select(const std::vector<std::string>& ids) const;

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& doc);
  void save(const std::filesystem::path& path) const;
  static DatasetManifest load(const std::filesystem::path& path);

 private:
  Task task_ = Task::kBinary;
  std::vector<std::string> class_names_;
  std::vector<LabeledImage> images_;
  std::vector<std::size_t> counts_;
};

}  // namespace itmainn::dataset
