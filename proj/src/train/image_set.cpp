#include "itmainn/train/image_set.hpp"

#include <cstring>

#include "itmainn/augment/image.hpp"
#include "itmainn/core/error.hpp"
#include "itmainn/model/classifier.hpp"

namespace itmainn::train {

torch::Tensor ImageSet::batch(const std::vector<std::size_t>& indices) const {
  std::vector<augment::NormalizedImage> images;
  images.reserve(indices.size());
  for (auto i : indices) images.push_back(image(i));
  return model::to_batch(images);
}

std::vector<int> ImageSet::labels() const {
  std::vector<int> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = label(i);
  return out;
}

InMemoryImageSet::InMemoryImageSet(std::vector<augment::NormalizedImage> images, std::vector<int> labels,
                                   std::vector<std::string> ids)
    : images_(std::move(images)), labels_(std::move(labels)), ids_(std::move(ids)) {
  if (images_.size() != labels_.size()) fail(ErrorKind::kInvalidArgument, "images and labels differ in length");
  if (!ids_.empty() && ids_.size() != images_.size()) fail(ErrorKind::kInvalidArgument, "ids and images differ in length");
}

std::string InMemoryImageSet::id(std::size_t i) const { return ids_.empty() ? std::to_string(i) : ids_.at(i); }

FileImageSet::FileImageSet(std::vector<dataset::LabeledImage> images, augment::PreprocessSpec spec, bool cache)
    : images_(std::move(images)), spec_(std::move(spec)), cache_(cache), cached_(cache ? images_.size() : 0) {}

augment::NormalizedImage FileImageSet::image(std::size_t i) const {
  if (cache_) {
    std::lock_guard lock(mutex_);
    if (cached_.at(i)) return *cached_[i];
  }
  auto img = augment::preprocess(augment::load_image(images_.at(i).path), spec_);
  if (cache_) {
    std::lock_guard lock(mutex_);
    cached_[i] = img;
  }
  return img;
}

}  // namespace itmainn::train
