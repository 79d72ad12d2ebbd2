#include "itmainn/service/config.hpp"

#include <cstdlib>
#include <set>

#include "itmainn/core/error.hpp"
#include "itmainn/core/io.hpp"

namespace itmainn::service {

using nlohmann::json;

namespace {

[[noreturn]] void config_fail(const std::string& key, const std::string& why) {
  fail(ErrorKind::kConfigError, "service config '" + key + "': " + why);
}

}  // namespace

void ServiceConfig::validate() const {
  if (port < 0 || port > 65535) config_fail("port", "must be in [0, 65535]");
  if (bundle_path.empty()) config_fail("bundle_path", "required");
  if (store_path.empty()) config_fail("store_path", "required");
  if (api_token.empty()) config_fail("api_token", "required; dashboard routes are token protected");
  if (!(threshold >= 0.0 && threshold <= 1.0)) config_fail("threshold", "must be in [0, 1]");
  if (max_upload_bytes == 0) config_fail("max_upload_bytes", "must be positive");
  if (positive_class.empty()) config_fail("positive_class", "required");
  std::set<std::string> unique(symptom_catalog.begin(), symptom_catalog.end());
  if (symptom_catalog.empty() || unique.size() != symptom_catalog.size() || unique.count("")) {
    config_fail("symptom_catalog", "non-empty list of distinct keys");
  }
  try {
    validate_age_buckets(age_buckets);
  } catch (const Error& e) {
    config_fail("age_buckets", e.detail());
  }
  if (default_center_limit < 1) config_fail("default_center_limit", "must be >= 1");
  if (poll_interval_s < 1) config_fail("poll_interval_s", "must be >= 1");
  if (threads < 1) config_fail("threads", "must be >= 1");
}

json ServiceConfig::to_json() const {
  return {{"host", host},
          {"port", port},
          {"bundle_path", bundle_path.string()},
          {"multiclass_bundle_path", multiclass_bundle_path.string()},
          {"store_path", store_path.string()},
          {"image_dir", image_dir.string()},
          {"health_centers_csv", health_centers_csv.string()},
          {"static_dir", static_dir.string()},
          {"api_token", api_token},
          {"threshold", threshold},
          {"max_upload_bytes", max_upload_bytes},
          {"positive_class", positive_class},
          {"symptom_catalog", symptom_catalog},
          {"age_buckets", age_buckets_to_json(age_buckets)},
          {"default_center_limit", default_center_limit},
          {"poll_interval_s", poll_interval_s},
          {"threads", threads},
          {"infected_guidance", infected_guidance},
          {"uninfected_guidance", uninfected_guidance}};
}

ServiceConfig ServiceConfig::from_json(const json& doc, const std::string& source) {
  if (!doc.is_object()) fail(ErrorKind::kConfigError, source + ": service config must be an object");
  ServiceConfig c;
  const auto known = c.to_json();
  for (const auto& [key, _] : doc.items()) {
    if (!known.contains(key)) fail(ErrorKind::kConfigError, source + ": unknown key '" + key + "'");
  }
  try {
    auto path = [&](const char* key, std::filesystem::path& out) {
      if (doc.contains(key)) out = doc.at(key).get<std::string>();
    };
    if (doc.contains("host")) c.host = doc.at("host").get<std::string>();
    if (doc.contains("port")) c.port = doc.at("port").get<int>();
    path("bundle_path", c.bundle_path);
    path("multiclass_bundle_path", c.multiclass_bundle_path);
    path("store_path", c.store_path);
    path("image_dir", c.image_dir);
    path("health_centers_csv", c.health_centers_csv);
    path("static_dir", c.static_dir);
    if (doc.contains("api_token")) c.api_token = doc.at("api_token").get<std::string>();
    if (doc.contains("threshold")) c.threshold = doc.at("threshold").get<double>();
    if (doc.contains("max_upload_bytes")) c.max_upload_bytes = doc.at("max_upload_bytes").get<std::size_t>();
    if (doc.contains("positive_class")) c.positive_class = doc.at("positive_class").get<std::string>();
    if (doc.contains("symptom_catalog")) c.symptom_catalog = doc.at("symptom_catalog").get<std::vector<std::string>>();
    if (doc.contains("age_buckets")) c.age_buckets = age_buckets_from_json(doc.at("age_buckets"));
    if (doc.contains("default_center_limit")) c.default_center_limit = doc.at("default_center_limit").get<int>();
    if (doc.contains("poll_interval_s")) c.poll_interval_s = doc.at("poll_interval_s").get<int>();
    if (doc.contains("threads")) c.threads = doc.at("threads").get<int>();
    if (doc.contains("infected_guidance")) c.infected_guidance = doc.at("infected_guidance").get<std::string>();
    if (doc.contains("uninfected_guidance")) c.uninfected_guidance = doc.at("uninfected_guidance").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfigError, source + ": " + e.what());
  } catch (const Error& e) {
    fail(ErrorKind::kConfigError, source + ": " + e.detail());
  }
  return c;
}

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

void apply_env_overrides(ServiceConfig& c, const EnvLookup& env) {
  if (auto v = env("ITMAINN_BUNDLE_PATH")) c.bundle_path = *v;
  if (auto v = env("ITMAINN_STORE_PATH")) c.store_path = *v;
  if (auto v = env("ITMAINN_API_TOKEN")) c.api_token = *v;
  if (auto v = env("ITMAINN_PORT")) {
    std::size_t used = 0;
    int port = -1;
    try {
      port = std::stoi(*v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v->size()) fail(ErrorKind::kConfigError, "ITMAINN_PORT='" + *v + "' is not a port");
    c.port = port;
  }
}

ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env) {
  ServiceConfig c = file ? ServiceConfig::from_json(load_json_file(*file), file->string()) : ServiceConfig{};
  apply_env_overrides(c, env);
  c.validate();
  return c;
}

}  // namespace itmainn::service
