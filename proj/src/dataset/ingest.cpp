#include "itmainn/dataset/ingest.hpp"

#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cctype>

#include "itmainn/core/error.hpp"
#include "itmainn/core/io.hpp"
#include "itmainn/core/log.hpp"

namespace itmainn::dataset {

namespace fs = std::filesystem;

nlohmann::json DatasetLayout::to_json() const {
  nlohmann::json classes_json = nlohmann::json::array();
  for (const auto& c : classes) {
    classes_json.push_back({{"name", c.class_name}, {"folder", c.folder}, {"augmented_folder", c.augmented_folder}});
  }
  return {{"task", to_string(task)},
          {"original_dir", original_dir},
          {"augmented_dir", augmented_dir},
          {"classes", std::move(classes_json)}};
}

DatasetLayout DatasetLayout::from_json(const nlohmann::json& doc) {
  try {
    DatasetLayout layout = default_layout(parse_task(doc.at("task").get<std::string>()));
    layout.original_dir = doc.value("original_dir", layout.original_dir);
    layout.augmented_dir = doc.value("augmented_dir", layout.augmented_dir);
    if (doc.contains("classes")) {
      layout.classes.clear();
      for (const auto& c : doc.at("classes")) {
        ClassFolder folder;
        folder.class_name = c.at("name").get<std::string>();
        folder.folder = c.value("folder", folder.class_name);
        folder.augmented_folder = c.value("augmented_folder", folder.folder);
        layout.classes.push_back(std::move(folder));
      }
    }
    return layout;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfigError, std::string("malformed dataset layout: ") + e.what());
  }
}

DatasetLayout msld_layout() {
  DatasetLayout layout;
  layout.task = Task::kBinary;
  layout.classes = {{"Other", "Others", "Others"}, {"Monkeypox", "Monkeypox", "Monkeypox"}};
  return layout;
}

DatasetLayout msld_v2_layout() {
  DatasetLayout layout;
  layout.task = Task::kMulticlass;
  layout.classes = {{"Monkeypox", "Mpox", "Mpox"},    {"Chickenpox", "Chickenpox", "Chickenpox"},
                    {"Measles", "Measles", "Measles"}, {"Cowpox", "Cowpox", "Cowpox"},
                    {"HFMD", "HFMD", "HFMD"},          {"Healthy", "Healthy", "Healthy"}};
  return layout;
}

DatasetLayout default_layout(Task task) {
  return task == Task::kBinary ? msld_layout() : msld_v2_layout();
}

bool has_image_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png";
}

namespace {

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && has_image_extension(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

bool decodes_to_rgb(const fs::path& path) {
  const cv::Mat image = cv::imread(path.string(), cv::IMREAD_COLOR);
  return !image.empty() && image.channels() == 3;
}

}  // namespace

IngestReport ingest_dataset(const fs::path& root, const DatasetLayout& layout, const IngestOptions& options) {
  if (layout.classes.size() != expected_class_count(layout.task)) {
    fail(ErrorKind::kInvalidArgument, "layout declares " + std::to_string(layout.classes.size()) + " classes for a " +
                                          std::string(to_string(layout.task)) + " task");
  }
  const fs::path originals = root / layout.original_dir;
  const fs::path augmented = root / layout.augmented_dir;

  IngestReport report;
  std::vector<LabeledImage> images;
  std::vector<std::string> class_names;

  auto add_folder = [&](const fs::path& dir, int label, Origin origin) {
    for (const auto& file : list_images(dir)) {
      if (options.verify_decode && !decodes_to_rgb(file)) {
        if (options.undecodable == UndecodablePolicy::kFail) {
          fail(ErrorKind::kUndecodableImage, file.string());
        }
        log::warn("skipping undecodable image " + file.string());
        report.skipped.push_back(file);
        continue;
      }
      LabeledImage image;
      image.id = fs::relative(file, root).generic_string();
      image.path = file;
      image.class_label = label;
      image.origin = origin;
      if (origin == Origin::kAugmented) {
        // Provenance sidecars written by the augmentation engine name the source.
        const fs::path sidecar = fs::path(file).replace_extension(".json");
        if (fs::is_regular_file(sidecar)) {
          try {
            image.source_id = load_json_file(sidecar).value("source_id", std::string());
          } catch (const Error&) {
            log::warn("ignoring unreadable sidecar " + sidecar.string());
          }
        }
      }
      images.push_back(std::move(image));
    }
  };

  for (std::size_t c = 0; c < layout.classes.size(); ++c) {
    const auto& folder = layout.classes[c];
    class_names.push_back(folder.class_name);
    const fs::path dir = originals / folder.folder;
    if (!fs::is_directory(dir)) fail(ErrorKind::kMissingClassDirectory, dir.string());
    add_folder(dir, static_cast<int>(c), Origin::kOriginal);
    if (options.include_augmented) {
      const fs::path aug_dir = augmented / folder.augmented_folder;
      if (fs::is_directory(aug_dir)) add_folder(aug_dir, static_cast<int>(c), Origin::kAugmented);
    }
  }

  std::sort(images.begin(), images.end(), [](const LabeledImage& a, const LabeledImage& b) { return a.path < b.path; });
  report.manifest = DatasetManifest(layout.task, std::move(class_names), std::move(images));
  return report;
}

}  // namespace itmainn::dataset
