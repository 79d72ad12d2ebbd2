#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "itmainn/dataset/manifest.hpp"

namespace itmainn::dataset {

// How a fractional per-class allocation becomes an integer count.
enum class Rounding { kHalfUp, kCeil, kFloor };

std::string_view to_string(Rounding rounding);
Rounding parse_rounding(std::string_view text);
std::size_t allocate(double fraction, std::size_t n, Rounding rounding);

struct SplitPlan {
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::vector<std::string> test_ids;
  double test_fraction = 0.0;
  double val_fraction = 0.0;
  std::uint64_t seed = 0;
  Rounding rounding = Rounding::kHalfUp;

  nlohmann::json to_json() const;
  static SplitPlan from_json(const nlohmann::json& doc);

  bool operator==(const SplitPlan&) const = default;
};

struct FoldPlan {
  int k = 0;
  std::vector<std::vector<std::string>> folds;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static FoldPlan from_json(const nlohmann::json& doc);

  bool operator==(const FoldPlan&) const = default;
};

// Per-class seeded shuffle, then `rounding(test_fraction * n_c)` ids go to
// test and `rounding(val_fraction * remaining_c)` to validation. Only
// original images take part; id lists come back sorted.
SplitPlan stratified_split(const DatasetManifest& manifest, double test_fraction, double val_fraction,
                           std::uint64_t seed, Rounding rounding = Rounding::kHalfUp);

// Per-class seeded shuffle dealt round-robin over k folds. The dealing cursor
// carries over between classes so fold totals also differ by at most one.
FoldPlan make_folds(const DatasetManifest& manifest, int k, std::uint64_t seed);

// Train/val/test plan for one cross-validation rotation: the fold is the test
// set and validation is carved per class from the remaining folds.
SplitPlan fold_split(const DatasetManifest& manifest, const FoldPlan& folds, int fold_index,
                     double val_fraction, std::uint64_t seed, Rounding rounding = Rounding::kHalfUp);

// Training images for a plan: the plan's train originals plus, optionally,
// augmented images. Augmented images whose known source lies outside the
// training ids are dropped so no derivative of a held-out image is trained on.
std::vector<LabeledImage> training_pool(const DatasetManifest& manifest, const SplitPlan& plan,
                                        bool include_augmented);

}  // namespace itmainn::dataset
