#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "itmainn/core/error.hpp"
#include "itmainn/core/io.hpp"
#include "itmainn/service/geo.hpp"

namespace itmainn::service {

const std::vector<std::string>& default_symptom_catalog();

enum class Gender { kMale, kFemale, kOther };
std::string_view to_string(Gender gender);
std::optional<Gender> parse_gender(std::string_view text);

// Kind ValidationError; fields names every offending input field.
class ValidationError : public Error {
 public:
  ValidationError(std::vector<std::string> fields, const std::string& message)
      : Error(ErrorKind::kValidationError, message), fields_(std::move(fields)) {}
  const std::vector<std::string>& fields() const { return fields_; }

 private:
  std::vector<std::string> fields_;
};

struct CaseRules {
  std::vector<std::string> symptom_catalog = default_symptom_catalog();
  std::vector<std::string> class_names;
  int max_age = 130;
};

struct CaseInput {
  std::string prediction;
  double confidence = 0.0;
  std::vector<std::string> symptoms;  // sorted, unique
  std::optional<int> age;
  std::optional<Gender> gender;
  std::optional<LatLon> location;
  std::string model_version;
  bool image_consent = false;
  bool dashboard_opt_out = false;
  // PNG bytes; written only when image_consent is set.
  std::optional<Bytes> image_png;
};

// Checks every field and reports all failures at once. The "image" field is
// base64; its bytes are returned undecoded in image_png for the caller to
// verify and re-encode.
CaseInput parse_case_input(const nlohmann::json& body, const CaseRules& rules);

struct CaseRecord {
  std::string case_id;
  std::string submitted_at;
  std::optional<std::string> image_ref;
  std::vector<std::string> symptoms;
  std::optional<int> age;
  std::optional<Gender> gender;
  std::optional<LatLon> location;
  std::string prediction;
  double confidence = 0.0;
  std::string model_version;
  bool image_consent = false;
  bool dashboard_opt_out = false;

  nlohmann::json to_json() const;
  static CaseRecord from_json(const nlohmann::json& doc);
  bool operator==(const CaseRecord&) const = default;
};

struct BoundingBox {
  double min_lat = -90.0;
  double min_lon = -180.0;
  double max_lat = 90.0;
  double max_lon = 180.0;
  bool contains(const LatLon& p) const {
    return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon && p.lon <= max_lon;
  }
};

// Timestamps are ISO-8601 UTC strings compared lexicographically; both ends
// inclusive. A region filter drops records without a location.
struct CaseFilter {
  std::optional<std::string> from;
  std::optional<std::string> to;
  std::optional<BoundingBox> region;
  std::optional<bool> infected;
  bool include_opted_out = false;
};

struct CasePage {
  std::size_t total = 0;
  std::size_t offset = 0;
  std::size_t limit = 0;
  std::vector<CaseRecord> items;
  nlohmann::json to_json() const;
};

struct StoreOptions {
  std::string positive_class = "Monkeypox";
  // Consented images land here as <case_id>.png; defaults to <store>.images.
  std::filesystem::path image_dir;
  int read_connections = 4;
};

// SQLite in WAL mode. Writes go through one connection under a mutex; reads
// use pooled connections, each inside its own read transaction. Throws
// StorageFailure on any database error.
class CaseStore {
 public:
  CaseStore(const std::filesystem::path& path, StoreOptions options = {});
  ~CaseStore();
  CaseStore(const CaseStore&) = delete;
  CaseStore& operator=(const CaseStore&) = delete;

  CaseRecord submit(const CaseInput& input);
  std::optional<CaseRecord> get(const std::string& case_id) const;
  // Oldest first, in submission order.
  CasePage list(const CaseFilter& filter, std::size_t limit, std::size_t offset) const;
  std::vector<CaseRecord> scan(const CaseFilter& filter) const;
  std::size_t count() const;
  bool reachable() const;
  // One <case_id>.json per record; returns the number written.
  std::size_t export_json(const std::filesystem::path& dir) const;

  const StoreOptions& options() const { return options_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  struct Impl;
  std::filesystem::path path_;
  StoreOptions options_;
  std::unique_ptr<Impl> impl_;
};

// 32 lowercase hex characters from the system CSPRNG.
std::string random_case_id();

}  // namespace itmainn::service
