#include "itmainn/augment/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "itmainn/core/error.hpp"

namespace itmainn::augment {

cv::Mat decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) fail(ErrorKind::kDecodeError, "empty byte stream");
  const cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat bgr;
  try {
    bgr = cv::imdecode(raw, cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    fail(ErrorKind::kDecodeError, e.what());
  }
  if (bgr.empty()) fail(ErrorKind::kDecodeError, "byte stream is not a supported image");
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

cv::Mat load_image(const std::filesystem::path& path) {
  Bytes bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const Error& e) {
    fail(ErrorKind::kDecodeError, e.detail());
  }
  try {
    return decode_image(bytes);
  } catch (const Error& e) {
    fail(ErrorKind::kDecodeError, path.string() + ": " + e.detail());
  }
}

Bytes encode_png(const cv::Mat& rgb) {
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", bgr, out, {cv::IMWRITE_PNG_COMPRESSION, 6})) {
    fail(ErrorKind::kWriteFailure, "PNG encoding failed");
  }
  return out;
}

void save_png(const std::filesystem::path& path, const cv::Mat& rgb) { write_file(path, encode_png(rgb)); }

}  // namespace itmainn::augment
