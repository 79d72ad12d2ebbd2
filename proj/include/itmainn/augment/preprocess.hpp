#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core/mat.hpp>

namespace itmainn::augment {

enum class Interpolation { kNearest, kBilinear, kBicubic, kArea };

std::string_view to_string(Interpolation interpolation);
Interpolation parse_interpolation(std::string_view text);

struct PreprocessSpec {
  int input_size = 224;
  std::array<double, 3> mean{0.5, 0.5, 0.5};
  std::array<double, 3> std{0.5, 0.5, 0.5};
  Interpolation interpolation = Interpolation::kBilinear;
  // Resize the short side to input_size, then crop the centre square.
  // Otherwise the image is resized directly, ignoring aspect ratio.
  bool center_crop = false;

  void validate() const;
  nlohmann::json to_json() const;
  static PreprocessSpec from_json(const nlohmann::json& doc);

  bool operator==(const PreprocessSpec&) const = default;
};

constexpr std::array<double, 3> kImageNetMean{0.485, 0.456, 0.406};
constexpr std::array<double, 3> kImageNetStd{0.229, 0.224, 0.225};

// input_size x input_size x 3 values, row-major HWC, each
// (pixel / 255 - mean[c]) / std[c].
class NormalizedImage {
 public:
  NormalizedImage(int size, std::vector<double> data) : size_(size), data_(std::move(data)) {}

  int size() const { return size_; }
  static constexpr int channels() { return 3; }
  double at(int y, int x, int c) const {
    return data_[(static_cast<std::size_t>(y) * size_ + x) * 3 + c];
  }
  std::span<const double> data() const { return data_; }
  // Channel-major copy (C, H, W) for network input.
  std::vector<float> to_chw() const;

 private:
  int size_;
  std::vector<double> data_;
};

NormalizedImage preprocess(const cv::Mat& rgb, const PreprocessSpec& spec);
NormalizedImage preprocess(std::span<const std::uint8_t> encoded, const PreprocessSpec& spec);

// Inverse of the normalisation step: unit-range pixel values (pixel / 255).
std::vector<double> denormalize(const NormalizedImage& image, const PreprocessSpec& spec);

}  // namespace itmainn::augment
