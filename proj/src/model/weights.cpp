#include "itmainn/model/weights.hpp"

#include <sstream>

#include "itmainn/core/error.hpp"
#include "itmainn/core/io.hpp"

namespace itmainn::model {

namespace fs = std::filesystem;

std::string sanitize_weight_id(const std::string& weight_source_id) {
  std::string out;
  for (char c : weight_source_id) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += keep ? c : '_';
  }
  return out;
}

std::string LocalCacheProvider::describe() const { return "local-cache:" + dir_.string(); }

fs::path LocalCacheProvider::path_for(const std::string& weight_source_id) const {
  return dir_ / (sanitize_weight_id(weight_source_id) + ".pt");
}

void LocalCacheProvider::load(const BackboneSpec& spec, Backbone& backbone) {
  const auto file = path_for(spec.weight_source_id);
  if (!fs::exists(file)) {
    fail(ErrorKind::kWeightFetchFailure,
         "no cached weights for '" + spec.weight_source_id + "' (expected " + file.string() + ")");
  }
  Bytes data;
  try {
    data = read_file_bytes(file);
  } catch (const Error& e) {
    fail(ErrorKind::kWeightFetchFailure, e.what());
  }
  const auto sidecar = fs::path(file.string() + ".sha256");
  if (fs::exists(sidecar)) {
    std::istringstream in(read_file_text(sidecar));
    std::string expected;
    in >> expected;
    if (expected != sha256_hex(data)) {
      fail(ErrorKind::kWeightFetchFailure, "checksum mismatch for " + file.string());
    }
  }
  try {
    torch::serialize::InputArchive archive;
    archive.load_from(reinterpret_cast<const char*>(data.data()), data.size());
    backbone.load(archive);
  } catch (const c10::Error& e) {
    fail(ErrorKind::kWeightFetchFailure, "cannot load " + file.string() + ": " + e.what_without_backtrace());
  }
}

void save_backbone_weights(Backbone& backbone, const fs::path& file) {
  torch::serialize::OutputArchive archive;
  backbone.save(archive);
  std::ostringstream out;
  archive.save_to(out);
  const std::string blob = out.str();
  write_file(file, blob);
  write_file(fs::path(file.string() + ".sha256"), sha256_hex(blob) + "  " + file.filename().string() + "\n");
}

}  // namespace itmainn::model
