#include "itmainn/dataset/manifest.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "itmainn/core/error.hpp"
#include "itmainn/core/io.hpp"

namespace itmainn::dataset {

std::string_view to_string(Task task) {
  return task == Task::kBinary ? "binary" : "multiclass";
}

Task parse_task(std::string_view text) {
  if (text == "binary") return Task::kBinary;
  if (text == "multiclass") return Task::kMulticlass;
  fail(ErrorKind::kInvalidArgument, "unknown task '" + std::string(text) + "'");
}

std::string_view to_string(Origin origin) {
  return origin == Origin::kOriginal ? "original" : "augmented";
}

Origin parse_origin(std::string_view text) {
  if (text == "original") return Origin::kOriginal;
  if (text == "augmented") return Origin::kAugmented;
  fail(ErrorKind::kInvalidArgument, "unknown origin '" + std::string(text) + "'");
}

std::size_t expected_class_count(Task task) {
  return task == Task::kBinary ? kBinaryClassCount : kMulticlassClassCount;
}

DatasetManifest::DatasetManifest(Task task, std::vector<std::string> class_names,
                                 std::vector<LabeledImage> images)
    : task_(task), class_names_(std::move(class_names)), images_(std::move(images)) {
  if (class_names_.size() != expected_class_count(task_)) {
    fail(ErrorKind::kInvalidArgument,
         std::string(to_string(task_)) + " task needs " + std::to_string(expected_class_count(task_)) +
             " classes, got " + std::to_string(class_names_.size()));
  }
  counts_.assign(class_names_.size(), 0);
  std::unordered_set<std::string> seen;
  for (const auto& image : images_) {
    if (image.class_label < 0 || static_cast<std::size_t>(image.class_label) >= class_names_.size()) {
      fail(ErrorKind::kLabelOutOfRange, "image " + image.id + " has label " + std::to_string(image.class_label));
    }
    if (!seen.insert(image.id).second) fail(ErrorKind::kInvalidArgument, "duplicate image id " + image.id);
    ++counts_[static_cast<std::size_t>(image.class_label)];
  }
}

std::vector<std::size_t> DatasetManifest::counts(Origin origin) const {
  std::vector<std::size_t> out(class_names_.size(), 0);
  for (const auto& image : images_) {
    if (image.origin == origin) ++out[static_cast<std::size_t>(image.class_label)];
  }
  return out;
}

int DatasetManifest::class_index(std::string_view name) const {
  const auto it = std::find(class_names_.begin(), class_names_.end(), name);
  if (it == class_names_.end()) fail(ErrorKind::kInvalidArgument, "unknown class '" + std::string(name) + "'");
  return static_cast<int>(it - class_names_.begin());
}

DatasetManifest DatasetManifest::filter(Origin origin) const {
  std::vector<LabeledImage> kept;
  std::copy_if(images_.begin(), images_.end(), std::back_inserter(kept),
               [&](const LabeledImage& image) { return image.origin == origin; });
  return DatasetManifest(task_, class_names_, std::move(kept));
}

DatasetManifest DatasetManifest::with_images(const std::vector<LabeledImage>& extra) const {
  std::vector<LabeledImage> all = images_;
  all.insert(all.end(), extra.begin(), extra.end());
  std::sort(all.begin(), all.end(), [](const LabeledImage& a, const LabeledImage& b) { return a.id < b.id; });
  return DatasetManifest(task_, class_names_, std::move(all));
}

const LabeledImage& DatasetManifest::find(std::string_view id) const {
  const auto it = std::find_if(images_.begin(), images_.end(), [&](const LabeledImage& image) { return image.id == id; });
  if (it == images_.end()) fail(ErrorKind::kInvalidArgument, "no image with id " + std::string(id));
  return *it;
}

std::vector<LabeledImage> DatasetManifest::select(const std::vector<std::string>& ids) const {
  std::unordered_map<std::string_view, const LabeledImage*> by_id;
  by_id.reserve(images_.size());
  for (const auto& image : images_) by_id.emplace(image.id, &image);
  std::vector<LabeledImage> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) fail(ErrorKind::kInvalidArgument, "no image with id " + id);
    out.push_back(*it->second);
  }
  return out;
}

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json images = nlohmann::json::array();
  for (const auto& image : images_) {
    nlohmann::json entry = {{"id", image.id},
                            {"path", image.path.generic_string()},
                            {"label", image.class_label},
                            {"origin", to_string(image.origin)}};
    if (!image.source_id.empty()) entry["source_id"] = image.source_id;
    images.push_back(std::move(entry));
  }
  return {{"task", to_string(task_)}, {"class_names", class_names_}, {"images", std::move(images)}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& doc) {
  try {
    std::vector<LabeledImage> images;
    for (const auto& entry : doc.at("images")) {
      LabeledImage image;
      image.id = entry.at("id").get<std::string>();
      image.path = entry.at("path").get<std::string>();
      image.class_label = entry.at("label").get<int>();
      image.origin = parse_origin(entry.at("origin").get<std::string>());
      image.source_id = entry.value("source_id", std::string());
      images.push_back(std::move(image));
    }
    return DatasetManifest(parse_task(doc.at("task").get<std::string>()),
                           doc.at("class_names").get<std::vector<std::string>>(), std::move(images));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfigError, std::string("malformed manifest: ") + e.what());
  }
}

void DatasetManifest::save(const std::filesystem::path& path) const { save_json_file(path, to_json()); }

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  return from_json(load_json_file(path));
}

}  // namespace itmainn::dataset
