#pragma once

#include <filesystem>
#include <span>

#include <opencv2/core/mat.hpp>

#include "itmainn/core/io.hpp"

namespace itmainn::augment {

// All decoded images are 8-bit, 3-channel, RGB order.
cv::Mat decode_image(std::span<const std::uint8_t> bytes);
cv::Mat load_image(const std::filesystem::path& path);
Bytes encode_png(const cv::Mat& rgb);
void save_png(const std::filesystem::path& path, const cv::Mat& rgb);

}  // namespace itmainn::augment
