#include "itmainn/augment/augment.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "itmainn/augment/image.hpp"
#include "itmainn/core/error.hpp"
#include "itmainn/core/io.hpp"

namespace itmainn::augment {

namespace fs = std::filesystem;

namespace {

constexpr std::pair<Transform, std::string_view> kNames[] = {
    {Transform::kRotation, "rotation"},       {Transform::kTranslation, "translation"},
    {Transform::kReflection, "reflection"},   {Transform::kShear, "shear"},
    {Transform::kColorAdjust, "color_adjust"}, {Transform::kNoise, "noise"},
    {Transform::kSharpen, "sharpen"},         {Transform::kBlur, "blur"},
    {Transform::kElasticDeform, "elastic_deform"}, {Transform::kBrightness, "brightness"},
    {Transform::kScale, "scale"},
};

double sample(Rng& rng, const Range& range) { return rng.uniform(range.min, range.max); }

cv::Mat warp(const cv::Mat& rgb, const cv::Mat& affine) {
  cv::Mat out;
  cv::warpAffine(rgb, out, affine, rgb.size(), cv::INTER_LINEAR, cv::BORDER_REFLECT_101);
  return out;
}

cv::Mat about_center(const cv::Mat& rgb, double a, double b, double c, double d) {
  // [a b; c d] applied around the image centre.
  const double cx = (rgb.cols - 1) / 2.0;
  const double cy = (rgb.rows - 1) / 2.0;
  cv::Mat m = (cv::Mat_<double>(2, 3) << a, b, cx - a * cx - b * cy, c, d, cy - c * cx - d * cy);
  return warp(rgb, m);
}

cv::Mat color_adjust(const cv::Mat& rgb, double hue_shift, double saturation_shift) {
  cv::Mat hsv;
  cv::cvtColor(rgb, hsv, cv::COLOR_RGB2HSV);
  // 8-bit hue spans [0, 180).
  const int dh = static_cast<int>(std::lround(hue_shift * 180.0));
  const double sat_scale = 1.0 + saturation_shift;
  for (int y = 0; y < hsv.rows; ++y) {
    auto* row = hsv.ptr<cv::Vec3b>(y);
    for (int x = 0; x < hsv.cols; ++x) {
      row[x][0] = static_cast<std::uint8_t>(((row[x][0] + dh) % 180 + 180) % 180);
      row[x][1] = cv::saturate_cast<std::uint8_t>(std::lround(row[x][1] * sat_scale));
    }
  }
  cv::Mat out;
  cv::cvtColor(hsv, out, cv::COLOR_HSV2RGB);
  return out;
}

cv::Mat add_noise(const cv::Mat& rgb, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  cv::Mat out = rgb.clone();
  const double scale = sigma * 255.0;
  for (int y = 0; y < out.rows; ++y) {
    auto* row = out.ptr<cv::Vec3b>(y);
    for (int x = 0; x < out.cols; ++x) {
      for (int c = 0; c < 3; ++c) {
        row[x][c] = cv::saturate_cast<std::uint8_t>(std::lround(row[x][c] + rng.normal() * scale));
      }
    }
  }
  return out;
}

cv::Mat sharpen(const cv::Mat& rgb, double amount) {
  cv::Mat blurred;
  cv::GaussianBlur(rgb, blurred, cv::Size(0, 0), 1.0, 1.0, cv::BORDER_REFLECT_101);
  cv::Mat out;
  cv::addWeighted(rgb, 1.0 + amount, blurred, -amount, 0.0, out);
  return out;
}

cv::Mat elastic(const cv::Mat& rgb, double alpha, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  cv::Mat dx(rgb.size(), CV_32F);
  cv::Mat dy(rgb.size(), CV_32F);
  for (int y = 0; y < rgb.rows; ++y) {
    for (int x = 0; x < rgb.cols; ++x) dx.at<float>(y, x) = static_cast<float>(rng.uniform(-1.0, 1.0));
  }
  for (int y = 0; y < rgb.rows; ++y) {
    for (int x = 0; x < rgb.cols; ++x) dy.at<float>(y, x) = static_cast<float>(rng.uniform(-1.0, 1.0));
  }
  cv::GaussianBlur(dx, dx, cv::Size(0, 0), sigma, sigma, cv::BORDER_REFLECT_101);
  cv::GaussianBlur(dy, dy, cv::Size(0, 0), sigma, sigma, cv::BORDER_REFLECT_101);
  cv::Mat map_x(rgb.size(), CV_32F);
  cv::Mat map_y(rgb.size(), CV_32F);
  for (int y = 0; y < rgb.rows; ++y) {
    for (int x = 0; x < rgb.cols; ++x) {
      map_x.at<float>(y, x) = static_cast<float>(x + alpha * dx.at<float>(y, x));
      map_y.at<float>(y, x) = static_cast<float>(y + alpha * dy.at<float>(y, x));
    }
  }
  cv::Mat out;
  cv::remap(rgb, out, map_x, map_y, cv::INTER_LINEAR, cv::BORDER_REFLECT_101);
  return out;
}

void check_range(const Range& range, const char* name) {
  if (!(range.min <= range.max)) {
    fail(ErrorKind::kInvalidArgument, std::string("range for ") + name + " has min > max");
  }
}

nlohmann::json range_json(const Range& r) { return nlohmann::json::array({r.min, r.max}); }

Range range_from(const nlohmann::json& doc, const char* key, Range fallback) {
  if (!doc.contains(key)) return fallback;
  const auto values = doc.at(key).get<std::vector<double>>();
  if (values.size() != 2) fail(ErrorKind::kConfigError, std::string("range '") + key + "' needs [min, max]");
  return {values[0], values[1]};
}

}  // namespace

std::string_view to_string(Transform transform) {
  for (const auto& [kind, name] : kNames) {
    if (kind == transform) return name;
  }
  return "unknown";
}

Transform parse_transform(std::string_view text) {
  for (const auto& [kind, name] : kNames) {
    if (name == text) return kind;
  }
  fail(ErrorKind::kInvalidArgument, "unknown transform '" + std::string(text) + "'");
}

const std::vector<Transform>& all_transforms() {
  static const std::vector<Transform> kAll = [] {
    std::vector<Transform> all;
    for (const auto& entry : kNames) all.push_back(entry.first);
    return all;
  }();
  return kAll;
}

void AugmentationConfig::validate() const {
  check_range(ranges.rotation_deg, "rotation");
  check_range(ranges.translation_frac, "translation");
  check_range(ranges.shear_deg, "shear");
  check_range(ranges.hue_shift, "hue");
  check_range(ranges.saturation_shift, "saturation");
  check_range(ranges.noise_sigma, "noise");
  check_range(ranges.sharpen_amount, "sharpen");
  check_range(ranges.blur_kernel, "blur");
  check_range(ranges.elastic_alpha, "elastic alpha");
  check_range(ranges.elastic_sigma, "elastic sigma");
  check_range(ranges.brightness, "brightness");
  check_range(ranges.scale, "scale");
  if (ranges.blur_kernel.min < 1.0) fail(ErrorKind::kInvalidArgument, "blur kernel must be >= 1");
  if (ranges.elastic_sigma.min <= 0.0) fail(ErrorKind::kInvalidArgument, "elastic sigma must be > 0");
  if (min_transforms_per_image < 1 || max_transforms_per_image < min_transforms_per_image) {
    fail(ErrorKind::kInvalidArgument, "transforms per image must satisfy 1 <= min <= max");
  }
  for (const auto& [name, target] : target_count_per_class) {
    if (target < 0) fail(ErrorKind::kInvalidArgument, "negative target for class " + name);
  }
}

nlohmann::json AugmentationConfig::to_json() const {
  nlohmann::json enabled = nlohmann::json::array();
  for (auto t : enabled_transforms) enabled.push_back(to_string(t));
  return {{"enabled_transforms", enabled},
          {"ranges",
           {{"rotation_deg", range_json(ranges.rotation_deg)},
            {"translation_frac", range_json(ranges.translation_frac)},
            {"shear_deg", range_json(ranges.shear_deg)},
            {"hue_shift", range_json(ranges.hue_shift)},
            {"saturation_shift", range_json(ranges.saturation_shift)},
            {"noise_sigma", range_json(ranges.noise_sigma)},
            {"sharpen_amount", range_json(ranges.sharpen_amount)},
            {"blur_kernel", range_json(ranges.blur_kernel)},
            {"elastic_alpha", range_json(ranges.elastic_alpha)},
            {"elastic_sigma", range_json(ranges.elastic_sigma)},
            {"brightness", range_json(ranges.brightness)},
            {"scale", range_json(ranges.scale)}}},
          {"target_count_per_class", target_count_per_class},
          {"seed", seed},
          {"min_transforms_per_image", min_transforms_per_image},
          {"max_transforms_per_image", max_transforms_per_image}};
}

AugmentationConfig AugmentationConfig::from_json(const nlohmann::json& doc) {
  AugmentationConfig config;
  try {
    if (doc.contains("enabled_transforms")) {
      config.enabled_transforms.clear();
      for (const auto& name : doc.at("enabled_transforms")) config.enabled_transforms.insert(parse_transform(name.get<std::string>()));
    }
    const nlohmann::json ranges = doc.value("ranges", nlohmann::json::object());
    auto& r = config.ranges;
    r.rotation_deg = range_from(ranges, "rotation_deg", r.rotation_deg);
    r.translation_frac = range_from(ranges, "translation_frac", r.translation_frac);
    r.shear_deg = range_from(ranges, "shear_deg", r.shear_deg);
    r.hue_shift = range_from(ranges, "hue_shift", r.hue_shift);
    r.saturation_shift = range_from(ranges, "saturation_shift", r.saturation_shift);
    r.noise_sigma = range_from(ranges, "noise_sigma", r.noise_sigma);
    r.sharpen_amount = range_from(ranges, "sharpen_amount", r.sharpen_amount);
    r.blur_kernel = range_from(ranges, "blur_kernel", r.blur_kernel);
    r.elastic_alpha = range_from(ranges, "elastic_alpha", r.elastic_alpha);
    r.elastic_sigma = range_from(ranges, "elastic_sigma", r.elastic_sigma);
    r.brightness = range_from(ranges, "brightness", r.brightness);
    r.scale = range_from(ranges, "scale", r.scale);
    config.target_count_per_class = doc.value("target_count_per_class", std::map<std::string, int>{});
    config.seed = doc.value("seed", std::uint64_t{0});
    config.min_transforms_per_image = doc.value("min_transforms_per_image", 1);
    config.max_transforms_per_image = doc.value("max_transforms_per_image", 3);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfigError, std::string("malformed augmentation config: ") + e.what());
  }
  config.validate();
  return config;
}

AugmentationRecipe sample_recipe(std::uint64_t seed, const AugmentationConfig& config) {
  if (config.enabled_transforms.empty()) fail(ErrorKind::kNoTransformsEnabled, "no transforms enabled");
  Rng rng(seed);
  std::vector<Transform> pool(config.enabled_transforms.begin(), config.enabled_transforms.end());
  const int available = static_cast<int>(pool.size());
  const int lo = std::min(config.min_transforms_per_image, available);
  const int hi = std::min(config.max_transforms_per_image, available);
  const auto count = static_cast<std::size_t>(rng.uniform_int(lo, hi));
  // Partial Fisher-Yates: the first `count` slots become the draw.
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }

  const auto& r = config.ranges;
  AugmentationRecipe recipe;
  recipe.seed = seed;
  for (std::size_t i = 0; i < count; ++i) {
    AppliedTransform step{pool[i], nlohmann::json::object()};
    switch (step.kind) {
      case Transform::kRotation: step.params["angle_deg"] = sample(rng, r.rotation_deg); break;
      case Transform::kTranslation:
        step.params["dx_frac"] = sample(rng, r.translation_frac);
        step.params["dy_frac"] = sample(rng, r.translation_frac);
        break;
      case Transform::kReflection: step.params["axis"] = rng.bernoulli(0.5) ? "horizontal" : "vertical"; break;
      case Transform::kShear: step.params["shear_deg"] = sample(rng, r.shear_deg); break;
      case Transform::kColorAdjust:
        step.params["hue_shift"] = sample(rng, r.hue_shift);
        step.params["saturation_shift"] = sample(rng, r.saturation_shift);
        break;
      case Transform::kNoise:
        step.params["sigma"] = sample(rng, r.noise_sigma);
        step.params["seed"] = rng.next_u64();
        break;
      case Transform::kSharpen: step.params["amount"] = sample(rng, r.sharpen_amount); break;
      case Transform::kBlur: {
        // Odd kernel sizes inside the range.
        const int lo_k = static_cast<int>(std::ceil(r.blur_kernel.min));
        const int hi_k = static_cast<int>(std::floor(r.blur_kernel.max));
        std::vector<int> odd;
        for (int k = lo_k; k <= hi_k; ++k) {
          if (k % 2 == 1) odd.push_back(k);
        }
        if (odd.empty()) odd.push_back(lo_k | 1);
        step.params["kernel"] = odd[rng.uniform_index(odd.size())];
        break;
      }
      case Transform::kElasticDeform:
        step.params["alpha"] = sample(rng, r.elastic_alpha);
        step.params["sigma"] = sample(rng, r.elastic_sigma);
        step.params["seed"] = rng.next_u64();
        break;
      case Transform::kBrightness: step.params["factor"] = sample(rng, r.brightness); break;
      case Transform::kScale: step.params["factor"] = sample(rng, r.scale); break;
    }
    recipe.steps.push_back(std::move(step));
  }
  return recipe;
}

cv::Mat apply_transform(const cv::Mat& rgb, const AppliedTransform& step) {
  const auto& p = step.params;
  switch (step.kind) {
    case Transform::kRotation: {
      const double theta = p.at("angle_deg").get<double>() * std::numbers::pi / 180.0;
      const double c = std::cos(theta), s = std::sin(theta);
      return about_center(rgb, c, s, -s, c);
    }
    case Transform::kTranslation: {
      cv::Mat m = (cv::Mat_<double>(2, 3) << 1, 0, p.at("dx_frac").get<double>() * rgb.cols, 0, 1,
                   p.at("dy_frac").get<double>() * rgb.rows);
      return warp(rgb, m);
    }
    case Transform::kReflection: {
      cv::Mat out;
      cv::flip(rgb, out, p.at("axis").get<std::string>() == "horizontal" ? 1 : 0);
      return out;
    }
    case Transform::kShear: {
      const double t = std::tan(p.at("shear_deg").get<double>() * std::numbers::pi / 180.0);
      return about_center(rgb, 1.0, t, 0.0, 1.0);
    }
    case Transform::kColorAdjust:
      return color_adjust(rgb, p.at("hue_shift").get<double>(), p.at("saturation_shift").get<double>());
    case Transform::kNoise: return add_noise(rgb, p.at("sigma").get<double>(), p.at("seed").get<std::uint64_t>());
    case Transform::kSharpen: return sharpen(rgb, p.at("amount").get<double>());
    case Transform::kBlur: {
      const int k = p.at("kernel").get<int>();
      cv::Mat out;
      cv::GaussianBlur(rgb, out, cv::Size(k, k), 0.0, 0.0, cv::BORDER_REFLECT_101);
      return out;
    }
    case Transform::kElasticDeform:
      return elastic(rgb, p.at("alpha").get<double>(), p.at("sigma").get<double>(), p.at("seed").get<std::uint64_t>());
    case Transform::kBrightness: {
      cv::Mat out;
      rgb.convertTo(out, CV_8UC3, p.at("factor").get<double>(), 0.0);
      return out;
    }
    case Transform::kScale: {
      const double f = p.at("factor").get<double>();
      return about_center(rgb, f, 0.0, 0.0, f);
    }
  }
  return rgb.clone();
}

cv::Mat apply_recipe(const cv::Mat& rgb, const AugmentationRecipe& recipe) {
  cv::Mat current = rgb.clone();
  for (const auto& step : recipe.steps) current = apply_transform(current, step);
  return current;
}

std::vector<dataset::LabeledImage> augment_class(const std::vector<dataset::LabeledImage>& images, int class_target,
                                                 const AugmentationConfig& config, const AugmentOutput& output) {
  config.validate();
  const auto n = static_cast<int>(images.size());
  if (class_target < n) {
    fail(ErrorKind::kTargetBelowOriginalCount,
         "target " + std::to_string(class_target) + " is below the " + std::to_string(n) + " source images");
  }
  if (class_target == n) return {};
  if (config.enabled_transforms.empty()) fail(ErrorKind::kNoTransformsEnabled, "augmentation requested with no transforms");
  if (images.empty()) fail(ErrorKind::kInvalidArgument, "cannot augment an empty class");
  const int label = images.front().class_label;
  for (const auto& image : images) {
    if (image.class_label != label) fail(ErrorKind::kInvalidArgument, "augment_class inputs span several classes");
  }

  // Output names use the source stem unless two sources share one.
  std::unordered_map<std::string, int> stem_uses;
  for (const auto& image : images) ++stem_uses[image.path.stem().string()];
  auto base_name = [&](const dataset::LabeledImage& image) {
    std::string stem = image.path.stem().string();
    if (stem_uses[stem] > 1) {
      char hash[17];
      std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(fnv1a64(image.id)));
      stem += std::string("_") + std::string(hash, 8);
    }
    return stem;
  };

  std::vector<cv::Mat> sources;
  sources.reserve(images.size());
  for (const auto& image : images) sources.push_back(load_image(image.path));

  const int needed = class_target - n;
  std::vector<dataset::LabeledImage> out;
  out.reserve(static_cast<std::size_t>(needed));
  for (int j = 0; j < needed; ++j) {
    const auto s = static_cast<std::size_t>(j % n);
    const int round = j / n;
    const auto& source = images[s];
    const std::uint64_t seed = derive_seed(config.seed, source.id + "#" + std::to_string(round));
    const AugmentationRecipe recipe = sample_recipe(seed, config);
    const cv::Mat augmented = apply_recipe(sources[s], recipe);

    const std::string name = base_name(source) + "_aug" + std::to_string(round);
    const fs::path rel = output.class_dir / (name + ".png");
    const fs::path file = output.root / rel;
    save_png(file, augmented);

    nlohmann::json steps = nlohmann::json::array();
    for (const auto& step : recipe.steps) steps.push_back({{"name", to_string(step.kind)}, {"params", step.params}});
    const nlohmann::json sidecar = {{"source_id", source.id}, {"transforms", steps}, {"seed", seed}};
    save_json_file(output.root / output.class_dir / (name + ".json"), sidecar);

    dataset::LabeledImage image;
    image.id = rel.generic_string();
    image.path = file;
    image.class_label = label;
    image.origin = dataset::Origin::kAugmented;
    image.source_id = source.id;
    out.push_back(std::move(image));
  }
  return out;
}

std::vector<dataset::LabeledImage> augment_training_set(const dataset::DatasetManifest& manifest,
                                                        const std::vector<std::string>& train_ids,
                                                        const AugmentationConfig& config, const fs::path& root,
                                                        const fs::path& augmented_dir) {
  const auto train = manifest.select(train_ids);
  std::vector<dataset::LabeledImage> all;
  for (std::size_t c = 0; c < manifest.num_classes(); ++c) {
    const auto& name = manifest.class_names()[c];
    const auto it = config.target_count_per_class.find(name);
    if (it == config.target_count_per_class.end()) continue;
    std::vector<dataset::LabeledImage> members;
    for (const auto& image : train) {
      if (image.class_label == static_cast<int>(c) && image.origin == dataset::Origin::kOriginal) members.push_back(image);
    }
    auto generated = augment_class(members, it->second, config, {root, augmented_dir / name});
    all.insert(all.end(), std::make_move_iterator(generated.begin()), std::make_move_iterator(generated.end()));
  }
  return all;
}

}  // namespace itmainn::augment
