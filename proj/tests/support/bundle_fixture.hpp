#pragma once

#include <filesystem>
#include <string>

#include "itmainn/model/bundle.hpp"
#include "itmainn/model/registry.hpp"
#include "itmainn/model/weights.hpp"

namespace itmainn::testing {

// Exports an untrained-but-marked tiny model so the serving path can load it.
inline model::BundleManifest write_tiny_bundle(const std::filesystem::path& out, model::Task task,
                                               const std::string& backbone = "mobilevit", std::uint64_t seed = 1) {
  model::SeededInitProvider weights;
  auto m = model::build_model(model::registry_spec(backbone, "tiny"), model::HeadSpec::for_task(task), weights, seed);
  m.set_trained_epochs(1);
  return model::export_bundle(m, {}, out);
}

}  // namespace itmainn::testing
