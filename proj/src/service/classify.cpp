#include "itmainn/service/classify.hpp"

#include <sstream>

#include "itmainn/augment/preprocess.hpp"
#include "itmainn/core/error.hpp"
#include "itmainn/core/io.hpp"

namespace itmainn::service {

std::shared_ptr<const Deployment> load_deployment(const std::filesystem::path& dir) {
  auto model = model::load_bundle(dir);
  auto manifest = model::read_bundle_manifest(dir);
  std::istringstream checksum(read_file_text(dir / model::kChecksumFile));
  std::string version;
  checksum >> version;
  return std::make_shared<const Deployment>(Deployment{std::move(model), std::move(manifest), std::move(version)});
}

nlohmann::json Classification::to_json() const {
  nlohmann::json scores = nlohmann::json::object();
  for (const auto& [name, p] : per_class) scores[name] = p;
  return {{"prediction", prediction}, {"confidence", confidence}, {"per_class", scores}, {"model_version", model_version}};
}

Classification decide(const std::vector<double>& scores, const std::vector<std::string>& class_names,
                      model::Task task, double threshold) {
  if (scores.size() != class_names.size() || scores.empty()) {
    fail(ErrorKind::kInvalidArgument, "score vector does not match the class list");
  }
  Classification c;
  for (std::size_t i = 0; i < scores.size(); ++i) c.per_class.emplace_back(class_names[i], scores[i]);
  std::size_t winner = 0;
  if (task == model::Task::kBinary) {
    if (scores.size() != 2) fail(ErrorKind::kInvalidArgument, "binary decision needs two scores");
    winner = scores[1] >= threshold ? 1 : 0;
  } else {
    for (std::size_t i = 1; i < scores.size(); ++i) {
      if (scores[i] > scores[winner]) winner = i;
    }
  }
  c.prediction = class_names[winner];
  c.confidence = scores[winner];
  return c;
}

Classification classify_image(const Deployment& d, std::span<const std::uint8_t> bytes, double threshold,
                              std::size_t max_bytes) {
  if (bytes.size() > max_bytes) {
    fail(ErrorKind::kOversizeImage,
         std::to_string(bytes.size()) + " bytes exceeds the " + std::to_string(max_bytes) + " byte limit");
  }
  auto image = augment::preprocess(bytes, d.manifest.backbone.preprocess);
  const auto scores = d.model.predict({std::move(image)});
  auto c = decide(scores.at(0), d.model.class_names(), d.model.task(), threshold);
  c.model_version = d.version;
  return c;
}

}  // namespace itmainn::service
