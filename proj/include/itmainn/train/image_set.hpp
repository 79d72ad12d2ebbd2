#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "itmainn/augment/preprocess.hpp"
#include "itmainn/dataset/manifest.hpp"

namespace itmainn::train {

// Indexed, labelled images ready for the network.
class ImageSet {
 public:
  virtual ~ImageSet() = default;
  virtual std::size_t size() const = 0;
  virtual int label(std::size_t i) const = 0;
  virtual std::string id(std::size_t i) const = 0;
  virtual augment::NormalizedImage image(std::size_t i) const = 0;

  bool empty() const { return size() == 0; }
  // Float [n, 3, S, S] tensor for the given indices.
  torch::Tensor batch(const std::vector<std::size_t>& indices) const;
  std::vector<int> labels() const;
};

class InMemoryImageSet : public ImageSet {
 public:
  InMemoryImageSet() = default;
  InMemoryImageSet(std::vector<augment::NormalizedImage> images, std::vector<int> labels,
                   std::vector<std::string> ids = {});

  std::size_t size() const override { return images_.size(); }
  int label(std::size_t i) const override { return labels_.at(i); }
  std::string id(std::size_t i) const override;
  augment::NormalizedImage image(std::size_t i) const override { return images_.at(i); }

 private:
  std::vector<augment::NormalizedImage> images_;
  std::vector<int> labels_;
  std::vector<std::string> ids_;
};

// Decodes and preprocesses from disk on access. With `cache` the network
// input is kept (as float) after the first read.
class FileImageSet : public ImageSet {
 public:
  FileImageSet(std::vector<dataset::LabeledImage> images, augment::PreprocessSpec spec, bool cache = false);

  std::size_t size() const override { return images_.size(); }
  int label(std::size_t i) const override { return images_.at(i).class_label; }
  std::string id(std::size_t i) const override { return images_.at(i).id; }
  augment::NormalizedImage image(std::size_t i) const override;
  const std::vector<dataset::LabeledImage>& entries() const { return images_; }

 private:
  std::vector<dataset::LabeledImage> images_;
  augment::PreprocessSpec spec_;
  bool cache_;
  mutable std::mutex mutex_;
  mutable std::vector<std::optional<augment::NormalizedImage>> cached_;
};

}  // namespace itmainn::train
