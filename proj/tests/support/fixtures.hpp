#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core/mat.hpp>

#include "itmainn/dataset/ingest.hpp"
#include "itmainn/dataset/manifest.hpp"

namespace itmainn::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "itmainn");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// Writes `counts[c]` small PNGs per class into the layout's originals folder
// (and `augmented_counts[c]` into the augmented folder when non-empty).
void write_dataset_tree(const std::filesystem::path& root, const dataset::DatasetLayout& layout,
                        const std::vector<int>& counts, const std::vector<int>& augmented_counts = {},
                        int image_size = 16, std::uint64_t seed = 1);

// Solid-colour squares (label 0) and circles (label 1) on black, with random
// colour and position jitter.
cv::Mat make_shape_image(int label, int size, std::uint64_t seed);

// Writes a two-class shapes dataset in the MSLD layout ("Others" = squares,
// "Monkeypox" = circles) and returns the ingested manifest.
dataset::DatasetManifest write_shapes_dataset(const std::filesystem::path& root, int per_class, int size,
                                              std::uint64_t seed);

// Six-class variant: class c is a shape with c + 3 vertices (or a circle).
dataset::DatasetManifest write_six_class_dataset(const std::filesystem::path& root, int per_class, int size,
                                                 std::uint64_t seed);

// In-memory manifest with synthetic ids and no files; for split properties.
dataset::DatasetManifest synthetic_manifest(dataset::Task task, const std::vector<int>& counts,
                                            const std::vector<int>& augmented_counts = {});

}  // namespace itmainn::testing
