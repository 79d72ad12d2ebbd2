#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "itmainn/model/backbone.hpp"
#include "itmainn/model/spec.hpp"

namespace itmainn::model {

// Supplies pretrained backbone weights for a spec's weight_source_id.
class WeightProvider {
 public:
  virtual ~WeightProvider() = default;
  virtual std::string describe() const = 0;
  // Overwrites the backbone's parameters and buffers. Throws
  // WeightFetchFailure when the weights cannot be produced.
  virtual void load(const BackboneSpec& spec, Backbone& backbone) = 0;
};

// Reads <dir>/<sanitised id>.pt, a torch archive keyed by this library's
// parameter names. When <file>.sha256 exists its digest must match.
class LocalCacheProvider : public WeightProvider {
 public:
  explicit LocalCacheProvider(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::string describe() const override;
  void load(const BackboneSpec& spec, Backbone& backbone) override;
  std::filesystem::path path_for(const std::string& weight_source_id) const;

 private:
  std::filesystem::path dir_;
};

// Keeps the seeded random initialisation. For tests and offline smoke runs
// only: nothing is pretrained.
class SeededInitProvider : public WeightProvider {
 public:
  std::string describe() const override { return "seeded-random-init"; }
  void load(const BackboneSpec&, Backbone&) override {}
};

std::string sanitize_weight_id(const std::string& weight_source_id);

// Writes a backbone's state in the format LocalCacheProvider reads, plus the
// .sha256 sidecar.
void save_backbone_weights(Backbone& backbone, const std::filesystem::path& file);

}  // namespace itmainn::model
