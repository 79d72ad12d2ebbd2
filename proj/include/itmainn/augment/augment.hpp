#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core/mat.hpp>

#include "itmainn/core/random.hpp"
#include "itmainn/dataset/manifest.hpp"

namespace itmainn::augment {

enum class Transform {
  kRotation,
  kTranslation,
  kReflection,
  kShear,
  kColorAdjust,
  kNoise,
  kSharpen,
  kBlur,
  kElasticDeform,
  kBrightness,
  kScale,
};

std::string_view to_string(Transform transform);
Transform parse_transform(std::string_view text);
const std::vector<Transform>& all_transforms();

struct Range {
  double min = 0.0;
  double max = 0.0;

  bool operator==(const Range&) const = default;
};

// Sampling intervals per transform. Units: degrees for angles, fraction of
// the side for translation, multiplicative factors for brightness/scale,
// fraction of the hue circle / saturation for colour jitter, unit intensity
// for noise sigma, pixels for blur kernels and elastic sigma.
struct TransformRanges {
  Range rotation_deg{-30.0, 30.0};
  Range translation_frac{-0.1, 0.1};
  Range shear_deg{-15.0, 15.0};
  Range hue_shift{-0.1, 0.1};
  Range saturation_shift{-0.1, 0.1};
  Range noise_sigma{0.01, 0.05};
  Range sharpen_amount{0.5, 1.5};
  Range blur_kernel{3.0, 5.0};
  Range elastic_alpha{20.0, 40.0};
  Range elastic_sigma{4.0, 6.0};
  Range brightness{0.7, 1.3};
  Range scale{0.9, 1.1};

  bool operator==(const TransformRanges&) const = default;
};

struct AugmentationConfig {
  std::set<Transform> enabled_transforms{all_transforms().begin(), all_transforms().end()};
  TransformRanges ranges;
  // Desired per-class total (originals + generated) keyed by class name.
  std::map<std::string, int> target_count_per_class;
  std::uint64_t seed = 0;
  int min_transforms_per_image = 1;
  int max_transforms_per_image = 3;

  void validate() const;
  nlohmann::json to_json() const;
  static AugmentationConfig from_json(const nlohmann::json& doc);
};

// Parameters are fully materialised (including seeds for stochastic
// transforms), so applying a step is a pure function of image and params.
struct AppliedTransform {
  Transform kind;
  nlohmann::json params;
};

// The transforms chosen for one generated image, in application order.
struct AugmentationRecipe {
  std::vector<AppliedTransform> steps;
  std::uint64_t seed = 0;
};

// Draws 1..max distinct enabled transforms and their parameters.
AugmentationRecipe sample_recipe(std::uint64_t seed, const AugmentationConfig& config);
cv::Mat apply_recipe(const cv::Mat& rgb, const AugmentationRecipe& recipe);
cv::Mat apply_transform(const cv::Mat& rgb, const AppliedTransform& step);

// Where generated images for one class are written. Ids are paths relative to
// `root`, so re-ingesting the tree reproduces them.
struct AugmentOutput {
  std::filesystem::path root;
  std::filesystem::path class_dir;  // relative to root
};

// Generates class_target - images.size() new images, cycling over sources
// round-robin. Each output gets a PNG and a JSON provenance sidecar.
std::vector<dataset::LabeledImage> augment_class(const std::vector<dataset::LabeledImage>& images, int class_target,
                                                 const AugmentationConfig& config, const AugmentOutput& output);

// Runs augment_class for every class that has a target, over the given
// training originals. `class_dir(c)` names the per-class output folder.
std::vector<dataset::LabeledImage> augment_training_set(const dataset::DatasetManifest& manifest,
                                                        const std::vector<std::string>& train_ids,
                                                        const AugmentationConfig& config,
                                                        const std::filesystem::path& root,
                                                        const std::filesystem::path& augmented_dir);

}  // namespace itmainn::augment
