#include "fixtures.hpp"

#include <opencv2/imgproc.hpp>

#include <cmath>
#include <numbers>

#include "itmainn/augment/image.hpp"
#include "itmainn/core/random.hpp"

namespace itmainn::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& prefix) {
  Rng rng(derive_seed(static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count()), prefix));
  for (;;) {
    path_ = fs::temp_directory_path() / (prefix + "-" + std::to_string(rng.next_u64() % 100000000));
    if (fs::create_directories(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_dataset_tree(const fs::path& root, const dataset::DatasetLayout& layout, const std::vector<int>& counts,
                        const std::vector<int>& augmented_counts, int image_size, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t c = 0; c < layout.classes.size(); ++c) {
    const auto& folder = layout.classes[c];
    auto write_many = [&](const fs::path& dir, int count, const std::string& prefix) {
      for (int i = 0; i < count; ++i) {
        cv::Mat image(image_size, image_size, CV_8UC3);
        for (int y = 0; y < image_size; ++y) {
          for (int x = 0; x < image_size; ++x) {
            image.at<cv::Vec3b>(y, x) = cv::Vec3b(static_cast<std::uint8_t>(rng.uniform_index(256)),
                                                  static_cast<std::uint8_t>(rng.uniform_index(256)),
                                                  static_cast<std::uint8_t>(rng.uniform_index(256)));
          }
        }
        char name[64];
        std::snprintf(name, sizeof(name), "%s%04d.png", prefix.c_str(), i);
        augment::save_png(dir / name, image);
      }
    };
    write_many(root / layout.original_dir / folder.folder, counts[c], folder.class_name + "_");
    if (!augmented_counts.empty()) {
      write_many(root / layout.augmented_dir / folder.augmented_folder, augmented_counts[c],
                 folder.class_name + "_aug_");
    }
  }
}

namespace {

cv::Mat make_polygon_image(int vertices, int size, std::uint64_t seed) {
  Rng rng(seed);
  cv::Mat image(size, size, CV_8UC3, cv::Scalar(0, 0, 0));
  const cv::Scalar color(static_cast<double>(rng.uniform_int(128, 255)), static_cast<double>(rng.uniform_int(128, 255)),
                         static_cast<double>(rng.uniform_int(128, 255)));
  const double half = size / 4.0;
  const double cx = size / 2.0 + rng.uniform(-size / 8.0, size / 8.0);
  const double cy = size / 2.0 + rng.uniform(-size / 8.0, size / 8.0);
  if (vertices == 0) {
    cv::circle(image, cv::Point(static_cast<int>(std::lround(cx)), static_cast<int>(std::lround(cy))),
               static_cast<int>(std::lround(half)), color, cv::FILLED, cv::LINE_8);
  } else if (vertices == 4) {
    cv::rectangle(image, cv::Point(static_cast<int>(cx - half), static_cast<int>(cy - half)),
                  cv::Point(static_cast<int>(cx + half) - 1, static_cast<int>(cy + half) - 1), color, cv::FILLED);
  } else {
    std::vector<cv::Point> points;
    for (int k = 0; k < vertices; ++k) {
      const double theta = 2.0 * std::numbers::pi * k / vertices - std::numbers::pi / 2.0;
      points.emplace_back(static_cast<int>(std::lround(cx + 1.3 * half * std::cos(theta))),
                          static_cast<int>(std::lround(cy + 1.3 * half * std::sin(theta))));
    }
    cv::fillConvexPoly(image, points, color, cv::LINE_8);
  }
  return image;
}

}  // namespace

cv::Mat make_shape_image(int label, int size, std::uint64_t seed) {
  return make_polygon_image(label == 0 ? 4 : 0, size, seed);
}

dataset::DatasetManifest write_shapes_dataset(const fs::path& root, int per_class, int size, std::uint64_t seed) {
  const auto layout = dataset::msld_layout();
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < per_class; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "img%04d.png", i);
      augment::save_png(root / layout.original_dir / layout.classes[static_cast<std::size_t>(c)].folder / name,
                        make_shape_image(c, size, derive_seed(seed, std::to_string(c) + "/" + std::to_string(i))));
    }
  }
  return dataset::ingest_dataset(root, layout).manifest;
}

dataset::DatasetManifest write_six_class_dataset(const fs::path& root, int per_class, int size, std::uint64_t seed) {
  const auto layout = dataset::msld_v2_layout();
  constexpr int kVertices[6] = {0, 3, 4, 5, 6, 8};
  for (std::size_t c = 0; c < 6; ++c) {
    for (int i = 0; i < per_class; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "img%04d.png", i);
      augment::save_png(root / layout.original_dir / layout.classes[c].folder / name,
                        make_polygon_image(kVertices[c], size, derive_seed(seed, std::to_string(c) + "/" + std::to_string(i))));
    }
  }
  return dataset::ingest_dataset(root, layout).manifest;
}

dataset::DatasetManifest synthetic_manifest(dataset::Task task, const std::vector<int>& counts,
                                            const std::vector<int>& augmented_counts) {
  std::vector<std::string> names;
  std::vector<dataset::LabeledImage> images;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    names.push_back("class" + std::to_string(c));
    for (int i = 0; i < counts[c]; ++i) {
      dataset::LabeledImage image;
      image.id = "orig/c" + std::to_string(c) + "/" + std::to_string(i);
      image.path = image.id;
      image.class_label = static_cast<int>(c);
      images.push_back(image);
    }
    if (!augmented_counts.empty()) {
      for (int i = 0; i < augmented_counts[c]; ++i) {
        dataset::LabeledImage image;
        image.id = "aug/c" + std::to_string(c) + "/" + std::to_string(i);
        image.path = image.id;
        image.class_label = static_cast<int>(c);
        image.origin = dataset::Origin::kAugmented;
        images.push_back(image);
      }
    }
  }
  return dataset::DatasetManifest(task, names, images);
}

}  // namespace itmainn::testing
