#include "itmainn/augment/preprocess.hpp"

#include <opencv2/imgproc.hpp>

#include "itmainn/augment/image.hpp"
#include "itmainn/core/error.hpp"

namespace itmainn::augment {

std::string_view to_string(Interpolation interpolation) {
  switch (interpolation) {
    case Interpolation::kNearest: return "nearest";
    case Interpolation::kBilinear: return "bilinear";
    case Interpolation::kBicubic: return "bicubic";
    case Interpolation::kArea: return "area";
  }
  return "bilinear";
}

Interpolation parse_interpolation(std::string_view text) {
  if (text == "nearest") return Interpolation::kNearest;
  if (text == "bilinear") return Interpolation::kBilinear;
  if (text == "bicubic") return Interpolation::kBicubic;
  if (text == "area") return Interpolation::kArea;
  fail(ErrorKind::kInvalidArgument, "unknown interpolation '" + std::string(text) + "'");
}

void PreprocessSpec::validate() const {
  if (input_size <= 0) fail(ErrorKind::kInvalidArgument, "input_size must be positive");
  for (double s : std) {
    if (!(s > 0.0)) fail(ErrorKind::kInvalidArgument, "normalization std components must be positive");
  }
}

nlohmann::json PreprocessSpec::to_json() const {
  return {{"input_size", input_size},
          {"mean", mean},
          {"std", std},
          {"interpolation", to_string(interpolation)},
          {"center_crop", center_crop}};
}

PreprocessSpec PreprocessSpec::from_json(const nlohmann::json& doc) {
  PreprocessSpec spec;
  try {
    spec.input_size = doc.at("input_size").get<int>();
    spec.mean = doc.at("mean").get<std::array<double, 3>>();
    spec.std = doc.at("std").get<std::array<double, 3>>();
    spec.interpolation = parse_interpolation(doc.value("interpolation", std::string("bilinear")));
    spec.center_crop = doc.value("center_crop", false);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfigError, std::string("malformed preprocess spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::vector<float> NormalizedImage::to_chw() const {
  const std::size_t plane = static_cast<std::size_t>(size_) * size_;
  std::vector<float> out(plane * 3);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) out[c * plane + i] = static_cast<float>(data_[i * 3 + c]);
  }
  return out;
}

namespace {

int cv_interpolation(Interpolation interpolation) {
  switch (interpolation) {
    case Interpolation::kNearest: return cv::INTER_NEAREST;
    case Interpolation::kBilinear: return cv::INTER_LINEAR;
    case Interpolation::kBicubic: return cv::INTER_CUBIC;
    case Interpolation::kArea: return cv::INTER_AREA;
  }
  return cv::INTER_LINEAR;
}

}  // namespace

NormalizedImage preprocess(const cv::Mat& rgb, const PreprocessSpec& spec) {
  spec.validate();
  if (rgb.empty() || rgb.rows == 0 || rgb.cols == 0) fail(ErrorKind::kZeroDimension, "image has zero width or height");
  if (rgb.type() != CV_8UC3) fail(ErrorKind::kDecodeError, "expected an 8-bit 3-channel image");

  const int size = spec.input_size;
  const int interp = cv_interpolation(spec.interpolation);
  cv::Mat resized;
  if (spec.center_crop) {
    const double scale = static_cast<double>(size) / std::min(rgb.rows, rgb.cols);
    const int w = std::max(size, static_cast<int>(std::lround(rgb.cols * scale)));
    const int h = std::max(size, static_cast<int>(std::lround(rgb.rows * scale)));
    cv::Mat scaled;
    if (w == rgb.cols && h == rgb.rows) {
      scaled = rgb;
    } else {
      cv::resize(rgb, scaled, cv::Size(w, h), 0, 0, interp);
    }
    resized = scaled(cv::Rect((w - size) / 2, (h - size) / 2, size, size)).clone();
  } else if (rgb.rows == size && rgb.cols == size) {
    resized = rgb;
  } else {
    cv::resize(rgb, resized, cv::Size(size, size), 0, 0, interp);
  }

  std::vector<double> data(static_cast<std::size_t>(size) * size * 3);
  std::size_t i = 0;
  for (int y = 0; y < size; ++y) {
    const auto* row = resized.ptr<cv::Vec3b>(y);
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < 3; ++c) data[i++] = (row[x][c] / 255.0 - spec.mean[c]) / spec.std[c];
    }
  }
  return NormalizedImage(size, std::move(data));
}

NormalizedImage preprocess(std::span<const std::uint8_t> encoded, const PreprocessSpec& spec) {
  return preprocess(decode_image(encoded), spec);
}

std::vector<double> denormalize(const NormalizedImage& image, const PreprocessSpec& spec) {
  const auto data = image.data();
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t c = i % 3;
    out[i] = data[i] * spec.std[c] + spec.mean[c];
  }
  return out;
}

}  // namespace itmainn::augment
