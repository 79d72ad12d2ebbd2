#include "itmainn/dataset/split.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "itmainn/core/error.hpp"
#include "itmainn/core/random.hpp"

namespace itmainn::dataset {
namespace {

// Original-image ids per class, in manifest order.
std::vector<std::vector<std::string>> originals_by_class(const DatasetManifest& manifest) {
  std::vector<std::vector<std::string>> by_class(manifest.num_classes());
  for (const auto& image : manifest.images()) {
    if (image.origin == Origin::kOriginal) by_class[static_cast<std::size_t>(image.class_label)].push_back(image.id);
  }
  return by_class;
}

void shuffle_class(std::vector<std::string>& ids, std::uint64_t seed, std::string_view stage,
                   const std::string& class_name) {
  Rng rng(derive_seed(seed, std::string(stage) + "/" + class_name));
  rng.shuffle(std::span(ids));
}

void check_fraction(double f, const char* name) {
  if (!(f >= 0.0 && f < 1.0)) {
    fail(ErrorKind::kFractionOutOfRange, std::string(name) + " must lie in [0, 1), got " + std::to_string(f));
  }
}

}  // namespace

std::string_view to_string(Rounding rounding) {
  switch (rounding) {
    case Rounding::kHalfUp: return "half_up";
    case Rounding::kCeil: return "ceil";
    case Rounding::kFloor: return "floor";
  }
  return "half_up";
}

Rounding parse_rounding(std::string_view text) {
  if (text == "half_up") return Rounding::kHalfUp;
  if (text == "ceil") return Rounding::kCeil;
  if (text == "floor") return Rounding::kFloor;
  fail(ErrorKind::kInvalidArgument, "unknown rounding rule '" + std::string(text) + "'");
}

std::size_t allocate(double fraction, std::size_t n, Rounding rounding) {
  // The tolerance absorbs representation error such as 0.2 * 125 = 25.000000000000004.
  constexpr double kTol = 1e-9;
  const double exact = fraction * static_cast<double>(n);
  double count = 0.0;
  switch (rounding) {
    case Rounding::kHalfUp: count = std::floor(exact + 0.5 + kTol); break;
    case Rounding::kCeil: count = std::ceil(exact - kTol); break;
    case Rounding::kFloor: count = std::floor(exact + kTol); break;
  }
  return std::min(n, static_cast<std::size_t>(std::max(0.0, count)));
}

SplitPlan stratified_split(const DatasetManifest& manifest, double test_fraction, double val_fraction,
                           std::uint64_t seed, Rounding rounding) {
  check_fraction(test_fraction, "test_fraction");
  check_fraction(val_fraction, "val_fraction");
  auto by_class = originals_by_class(manifest);

  SplitPlan plan;
  plan.test_fraction = test_fraction;
  plan.val_fraction = val_fraction;
  plan.seed = seed;
  plan.rounding = rounding;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& ids = by_class[c];
    if (ids.empty()) fail(ErrorKind::kEmptyClass, "class '" + manifest.class_names()[c] + "' has no original images");
    shuffle_class(ids, seed, "split", manifest.class_names()[c]);
    const std::size_t n_test = allocate(test_fraction, ids.size(), rounding);
    const std::size_t n_val = allocate(val_fraction, ids.size() - n_test, rounding);
    auto it = ids.begin();
    plan.test_ids.insert(plan.test_ids.end(), it, it + static_cast<std::ptrdiff_t>(n_test));
    it += static_cast<std::ptrdiff_t>(n_test);
    plan.val_ids.insert(plan.val_ids.end(), it, it + static_cast<std::ptrdiff_t>(n_val));
    it += static_cast<std::ptrdiff_t>(n_val);
    plan.train_ids.insert(plan.train_ids.end(), it, ids.end());
  }
  std::sort(plan.train_ids.begin(), plan.train_ids.end());
  std::sort(plan.val_ids.begin(), plan.val_ids.end());
  std::sort(plan.test_ids.begin(), plan.test_ids.end());
  return plan;
}

FoldPlan make_folds(const DatasetManifest& manifest, int k, std::uint64_t seed) {
  if (k < 2) fail(ErrorKind::kKTooSmall, "k must be >= 2, got " + std::to_string(k));
  auto by_class = originals_by_class(manifest);
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.assign(static_cast<std::size_t>(k), {});
  std::size_t cursor = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& ids = by_class[c];
    if (ids.size() < static_cast<std::size_t>(k)) {
      fail(ErrorKind::kClassSmallerThanK, "class '" + manifest.class_names()[c] + "' has " +
                                              std::to_string(ids.size()) + " originals, fewer than k=" +
                                              std::to_string(k));
    }
    shuffle_class(ids, seed, "folds", manifest.class_names()[c]);
    for (const auto& id : ids) {
      plan.folds[cursor].push_back(id);
      cursor = (cursor + 1) % static_cast<std::size_t>(k);
    }
  }
  for (auto& fold : plan.folds) std::sort(fold.begin(), fold.end());
  return plan;
}

SplitPlan fold_split(const DatasetManifest& manifest, const FoldPlan& folds, int fold_index, double val_fraction,
                     std::uint64_t seed, Rounding rounding) {
  if (fold_index < 0 || fold_index >= folds.k || static_cast<std::size_t>(folds.k) != folds.folds.size()) {
    fail(ErrorKind::kInvalidArgument, "fold index " + std::to_string(fold_index) + " out of range");
  }
  check_fraction(val_fraction, "val_fraction");
  const auto& test = folds.folds[static_cast<std::size_t>(fold_index)];
  const std::unordered_set<std::string> test_set(test.begin(), test.end());

  std::vector<std::vector<std::string>> pool(manifest.num_classes());
  for (const auto& image : manifest.images()) {
    if (image.origin == Origin::kOriginal && !test_set.contains(image.id)) {
      pool[static_cast<std::size_t>(image.class_label)].push_back(image.id);
    }
  }

  SplitPlan plan;
  plan.test_ids = test;
  plan.test_fraction = 1.0 / folds.k;
  plan.val_fraction = val_fraction;
  plan.seed = seed;
  plan.rounding = rounding;
  for (std::size_t c = 0; c < pool.size(); ++c) {
    auto& ids = pool[c];
    shuffle_class(ids, seed, "fold" + std::to_string(fold_index) + "/val", manifest.class_names()[c]);
    const std::size_t n_val = allocate(val_fraction, ids.size(), rounding);
    plan.val_ids.insert(plan.val_ids.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
    plan.train_ids.insert(plan.train_ids.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_val), ids.end());
  }
  std::sort(plan.train_ids.begin(), plan.train_ids.end());
  std::sort(plan.val_ids.begin(), plan.val_ids.end());
  std::sort(plan.test_ids.begin(), plan.test_ids.end());
  return plan;
}

std::vector<LabeledImage> training_pool(const DatasetManifest& manifest, const SplitPlan& plan,
                                        bool include_augmented) {
  std::vector<LabeledImage> pool = manifest.select(plan.train_ids);
  if (!include_augmented) return pool;
  const std::unordered_set<std::string> train(plan.train_ids.begin(), plan.train_ids.end());
  for (const auto& image : manifest.images()) {
    if (image.origin != Origin::kAugmented) continue;
    if (!image.source_id.empty() && !train.contains(image.source_id)) continue;
    pool.push_back(image);
  }
  return pool;
}

nlohmann::json SplitPlan::to_json() const {
  return {{"train_ids", train_ids}, {"val_ids", val_ids},   {"test_ids", test_ids},
          {"test_fraction", test_fraction}, {"val_fraction", val_fraction}, {"seed", seed},
          {"rounding", to_string(rounding)}};
}

SplitPlan SplitPlan::from_json(const nlohmann::json& doc) {
  try {
    SplitPlan plan;
    plan.train_ids = doc.at("train_ids").get<std::vector<std::string>>();
    plan.val_ids = doc.at("val_ids").get<std::vector<std::string>>();
    plan.test_ids = doc.at("test_ids").get<std::vector<std::string>>();
    plan.test_fraction = doc.at("test_fraction").get<double>();
    plan.val_fraction = doc.at("val_fraction").get<double>();
    plan.seed = doc.at("seed").get<std::uint64_t>();
    plan.rounding = parse_rounding(doc.value("rounding", std::string("half_up")));
    return plan;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfigError, std::string("malformed split plan: ") + e.what());
  }
}

nlohmann::json FoldPlan::to_json() const { return {{"k", k}, {"folds", folds}, {"seed", seed}}; }

FoldPlan FoldPlan::from_json(const nlohmann::json& doc) {
  try {
    FoldPlan plan;
    plan.k = doc.at("k").get<int>();
    plan.folds = doc.at("folds").get<std::vector<std::vector<std::string>>>();
    plan.seed = doc.at("seed").get<std::uint64_t>();
    return plan;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfigError, std::string("malformed fold plan: ") + e.what());
  }
}

}  // namespace itmainn::dataset
