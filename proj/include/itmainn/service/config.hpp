#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "itmainn/service/classify.hpp"
#include "itmainn/service/dashboard.hpp"

namespace itmainn::service {

struct ServiceConfig {
  std::string host = "0.0.0.0";
  int port = 8080;
  std::filesystem::path bundle_path;
  std::filesystem::path multiclass_bundle_path;  // optional second endpoint
  std::filesystem::path store_path = "cases.db";
  std::filesystem::path image_dir;               // defaults next to the store
  std::filesystem::path health_centers_csv;
  std::filesystem::path static_dir;              // served under /app when set
  std::string api_token;
  double threshold = 0.5;
  std::size_t max_upload_bytes = kDefaultMaxUploadBytes;
  std::string positive_class = "Monkeypox";
  std::vector<std::string> symptom_catalog = default_symptom_catalog();
  std::vector<AgeBucket> age_buckets = default_age_buckets();
  int default_center_limit = 5;
  int poll_interval_s = 30;
  int threads = 8;
  std::string infected_guidance =
      "This screening suggests a Monkeypox infection. It is not a diagnosis. Limit close contact with others and "
      "contact a health center.";
  std::string uninfected_guidance =
      "No Monkeypox detected. If lesions persist or new symptoms appear, consult a health professional.";

  // Throws ConfigError naming the offending key.
  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys are a ConfigError.
  static ServiceConfig from_json(const nlohmann::json& doc, const std::string& source = "config");
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

// ITMAINN_BUNDLE_PATH, ITMAINN_STORE_PATH, ITMAINN_API_TOKEN, ITMAINN_PORT.
void apply_env_overrides(ServiceConfig& config, const EnvLookup& env = process_env);

// File (if given) then environment, then validate().
ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file,
                                  const EnvLookup& env = process_env);

}  // namespace itmainn::service
