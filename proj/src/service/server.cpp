#include "itmainn/service/server.hpp"

#include <chrono>
#include <cmath>

// Room for bursts of concurrent submissions before the pool drains them.
#define CPPHTTPLIB_LISTEN_BACKLOG 256
#include <httplib.h>
#include <openssl/crypto.h>

#include "itmainn/augment/image.hpp"
#include "itmainn/core/io.hpp"
#include "itmainn/core/log.hpp"
#include "itmainn/service/dashboard.hpp"

namespace itmainn::service {

using nlohmann::json;

namespace {

constexpr std::size_t kDefaultPageSize = 50;
constexpr std::size_t kMaxPageSize = 500;
constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, int status, std::string_view kind, const std::string& message,
                const std::vector<std::string>& fields = {}) {
  json body{{"error", kind}, {"message", message}};
  if (!fields.empty()) body["fields"] = fields;
  send_json(res, status, body);
}

// Runs a handler, mapping library errors to their HTTP status.
template <typename F>
void guarded(httplib::Response& res, F&& handler) {
  try {
    handler();
  } catch (const ValidationError& e) {
    send_error(res, 422, to_string(e.kind()), e.detail(), e.fields());
  } catch (const Error& e) {
    const int status = http_status(e.kind());
    if (status >= 500) log::error(e.what());
    send_error(res, status, to_string(e.kind()), e.detail());
  }
}

[[noreturn]] void invalid_param(const std::string& name, const std::string& why) {
  throw ValidationError({name}, name + ": " + why);
}

std::optional<double> number_param(const httplib::Request& req, const std::string& name) {
  if (!req.has_param(name)) return std::nullopt;
  const auto text = req.get_param_value(name);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) invalid_param(name, "not a number");
  return v;
}

std::optional<std::size_t> count_param(const httplib::Request& req, const std::string& name) {
  const auto v = number_param(req, name);
  if (!v) return std::nullopt;
  if (*v < 0 || *v != std::floor(*v) || *v > 1e9) invalid_param(name, "not a non-negative integer");
  return static_cast<std::size_t>(*v);
}

// Date-only bounds cover the whole day.
std::optional<std::string> time_param(const httplib::Request& req, const std::string& name, bool upper) {
  if (!req.has_param(name)) return std::nullopt;
  auto text = req.get_param_value(name);
  try {
    auto tp = parse_utc(text);
    if (upper && text.size() == 10) tp += std::chrono::hours(24) - std::chrono::milliseconds(1);
    return format_utc(tp);
  } catch (const Error&) {
    invalid_param(name, "expected YYYY-MM-DD or YYYY-MM-DDTHH:MM:SS[.mmm]Z");
  }
}

// bbox=min_lat,min_lon,max_lat,max_lon
std::optional<BoundingBox> bbox_param(const httplib::Request& req) {
  if (!req.has_param("bbox")) return std::nullopt;
  const auto text = req.get_param_value("bbox");
  double v[4];
  char tail = 0;
  if (std::sscanf(text.c_str(), "%lf,%lf,%lf,%lf%c", &v[0], &v[1], &v[2], &v[3], &tail) != 4) {
    invalid_param("bbox", "expected min_lat,min_lon,max_lat,max_lon");
  }
  BoundingBox box{v[0], v[1], v[2], v[3]};
  try {
    check_coordinates({box.min_lat, box.min_lon});
    check_coordinates({box.max_lat, box.max_lon});
  } catch (const Error& e) {
    invalid_param("bbox", e.detail());
  }
  if (box.min_lat > box.max_lat || box.min_lon > box.max_lon) invalid_param("bbox", "minimum exceeds maximum");
  return box;
}

CaseFilter filter_params(const httplib::Request& req) {
  CaseFilter f;
  f.from = time_param(req, "from", false);
  f.to = time_param(req, "to", true);
  f.region = bbox_param(req);
  if (req.has_param("infected")) {
    const auto v = req.get_param_value("infected");
    if (v == "true" || v == "1") {
      f.infected = true;
    } else if (v == "false" || v == "0") {
      f.infected = false;
    } else {
      invalid_param("infected", "expected true or false");
    }
  }
  return f;
}

bool token_matches(const std::string& presented, const std::string& expected) {
  return !expected.empty() && presented.size() == expected.size() &&
         CRYPTO_memcmp(presented.data(), expected.data(), expected.size()) == 0;
}

}  // namespace

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidationError:
    case ErrorKind::kCoordinateOutOfRange:
    case ErrorKind::kInvalidArgument: return 422;
    case ErrorKind::kDecodeError:
    case ErrorKind::kUndecodableImage:
    case ErrorKind::kZeroDimension: return 415;
    case ErrorKind::kOversizeImage: return 413;
    case ErrorKind::kStorageFailure:
    case ErrorKind::kEmptyRegistry: return 503;
    default: return 500;
  }
}

ServiceParts open_service_parts(const ServiceConfig& config) {
  config.validate();
  ServiceParts parts;
  parts.config = config;
  parts.binary = load_deployment(config.bundle_path);
  if (!config.multiclass_bundle_path.empty()) parts.multiclass = load_deployment(config.multiclass_bundle_path);
  StoreOptions store_options;
  store_options.positive_class = config.positive_class;
  store_options.image_dir = config.image_dir;
  parts.store = std::make_shared<CaseStore>(config.store_path, store_options);
  if (!config.health_centers_csv.empty()) parts.centers = load_health_centers(config.health_centers_csv);
  return parts;
}

struct CaseService::Http {
  httplib::Server server;
  int port = -1;
};

CaseService::CaseService(ServiceParts parts) : parts_(std::move(parts)), http_(std::make_unique<Http>()) {
  const auto& cfg = parts_.config;
  auto& svr = http_->server;

  CaseRules rules;
  rules.symptom_catalog = cfg.symptom_catalog;
  for (const auto& d : {parts_.binary, parts_.multiclass}) {
    if (!d) continue;
    for (const auto& name : d->model.class_names()) {
      if (std::find(rules.class_names.begin(), rules.class_names.end(), name) == rules.class_names.end()) {
        rules.class_names.push_back(name);
      }
    }
  }
  DashboardOptions dash;
  dash.positive_class = cfg.positive_class;
  dash.symptom_catalog = cfg.symptom_catalog;
  dash.age_buckets = cfg.age_buckets;

  const int threads = cfg.threads;
  svr.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
  // Leave room for multipart framing so oversize files get our own 413 body.
  svr.set_payload_max_length(cfg.max_upload_bytes * 2 + 64 * 1024);
  svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      log::error(std::string("unhandled: ") + e.what());
    } catch (...) {
      log::error("unhandled non-standard exception");
    }
    send_error(res, 500, "InternalError", "internal server error");
  });

  auto authorized = [this](const httplib::Request& req, httplib::Response& res) {
    const auto header = req.get_header_value("Authorization");
    const std::string prefix = "Bearer ";
    if (header.rfind(prefix, 0) == 0 && token_matches(header.substr(prefix.size()), parts_.config.api_token)) {
      return true;
    }
    res.set_header("WWW-Authenticate", "Bearer");
    send_error(res, 401, "Unauthorized", "a valid bearer token is required");
    return false;
  };

  auto classify_with = [this](std::shared_ptr<const Deployment> deployment) {
    return [this, deployment](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto& cfg = parts_.config;
        std::string bytes;
        std::vector<std::string> symptoms;
        if (req.is_multipart_form_data()) {
          if (!req.has_file("image")) throw ValidationError({"image"}, "image: multipart file required");
          bytes = req.get_file_value("image").content;
          if (req.has_file("symptoms")) {
            json list = json::parse(req.get_file_value("symptoms").content, nullptr, false);
            json probe{{"prediction", "-"}, {"confidence", 0.0}, {"symptoms", list}};
            CaseRules symptom_rules;
            symptom_rules.symptom_catalog = cfg.symptom_catalog;
            symptoms = parse_case_input(probe, symptom_rules).symptoms;
          }
        } else {
          bytes = req.body;
        }
        if (bytes.size() > cfg.max_upload_bytes) {
          fail(ErrorKind::kOversizeImage, std::to_string(bytes.size()) + " bytes exceeds the " +
                                              std::to_string(cfg.max_upload_bytes) + " byte limit");
        }
        const auto* data = reinterpret_cast<const std::uint8_t*>(bytes.data());
        auto result = classify_image(*deployment, {data, bytes.size()}, cfg.threshold, cfg.max_upload_bytes);
        auto body = result.to_json();
        body["symptoms"] = symptoms;
        body["infected"] = result.prediction == cfg.positive_class;
        body["guidance"] = body["infected"].get<bool>() ? cfg.infected_guidance : cfg.uninfected_guidance;
        send_json(res, 200, body);
      });
    };
  };

  const std::string api = kApiPrefix;

  if (parts_.binary) {
    svr.Post(api + "/classify", classify_with(parts_.binary));
  } else {
    svr.Post(api + "/classify", [](const httplib::Request&, httplib::Response& res) {
      send_error(res, 503, "Unavailable", "no bundle loaded");
    });
  }
  if (parts_.multiclass) svr.Post(api + "/classify/multiclass", classify_with(parts_.multiclass));

  svr.Post(api + "/cases", [this, rules](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = json::parse(req.body, nullptr, false);
      if (body.is_discarded()) throw ValidationError({"body"}, "body is not valid JSON");
      CaseInput input = parse_case_input(body, rules);
      if (input.model_version.empty() && parts_.binary) input.model_version = parts_.binary->version;
      if (input.image_png) {
        if (!input.image_consent) {
          input.image_png.reset();
        } else {
          if (input.image_png->size() > parts_.config.max_upload_bytes) {
            fail(ErrorKind::kOversizeImage, "image exceeds the upload limit");
          }
          try {
            // Re-encoding drops any embedded metadata such as GPS tags.
            input.image_png = augment::encode_png(augment::decode_image(*input.image_png));
          } catch (const Error& e) {
            throw ValidationError({"image"}, "image: " + e.detail());
          }
        }
      }
      send_json(res, 201, parts_.store->submit(input).to_json());
    });
  });

  svr.Get(api + "/cases", [this, authorized](const httplib::Request& req, httplib::Response& res) {
    if (!authorized(req, res)) return;
    guarded(res, [&] {
      const auto filter = filter_params(req);
      const auto limit = count_param(req, "limit").value_or(kDefaultPageSize);
      if (limit < 1 || limit > kMaxPageSize) invalid_param("limit", "must be in [1, 500]");
      const auto offset = count_param(req, "offset").value_or(0);
      send_json(res, 200, parts_.store->list(filter, limit, offset).to_json());
    });
  });

  svr.Get(api + "/cases/:id", [this, authorized](const httplib::Request& req, httplib::Response& res) {
    if (!authorized(req, res)) return;
    guarded(res, [&] {
      auto record = parts_.store->get(req.path_params.at("id"));
      if (!record || record->dashboard_opt_out) {
        send_error(res, 404, "NotFound", "no such case");
        return;
      }
      send_json(res, 200, record->to_json());
    });
  });

  svr.Get(api + "/health-centers", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto lat = number_param(req, "lat");
      const auto lon = number_param(req, "lon");
      std::vector<std::string> missing;
      if (!lat) missing.push_back("lat");
      if (!lon) missing.push_back("lon");
      if (!missing.empty()) throw ValidationError(missing, "lat and lon are required");
      const auto limit = count_param(req, "limit").value_or(static_cast<std::size_t>(parts_.config.default_center_limit));
      if (limit < 1 || limit > 10000) invalid_param("limit", "must be >= 1");
      json out = json::array();
      for (const auto& c : nearest_centers(parts_.centers, {*lat, *lon}, static_cast<int>(limit))) {
        out.push_back({{"center", c.center.to_json()}, {"distance_km", c.distance_km}});
      }
      send_json(res, 200, out);
    });
  });

  svr.Get(api + "/dashboard/summary", [this, authorized, dash](const httplib::Request& req, httplib::Response& res) {
    if (!authorized(req, res)) return;
    guarded(res, [&] {
      auto filter = filter_params(req);
      filter.infected.reset();
      send_json(res, 200, dashboard_summary(*parts_.store, filter, dash).to_json());
    });
  });

  svr.Get(api + "/healthz", [this](const httplib::Request&, httplib::Response& res) {
    const bool bundle = parts_.binary != nullptr;
    const bool store = parts_.store && parts_.store->reachable();
    json body{{"status", bundle && store ? "ok" : "unavailable"}, {"bundle_loaded", bundle}, {"store_reachable", store}};
    if (bundle) body["model_version"] = parts_.binary->version;
    send_json(res, bundle && store ? 200 : 503, body);
  });

  svr.Get(api + "/config", [this, rules](const httplib::Request&, httplib::Response& res) {
    const auto& cfg = parts_.config;
    json models = json::object();
    if (parts_.binary) {
      models["binary"] = {{"class_names", parts_.binary->model.class_names()},
                          {"model_version", parts_.binary->version},
                          {"backbone", parts_.binary->manifest.backbone.name}};
    }
    if (parts_.multiclass) {
      models["multiclass"] = {{"class_names", parts_.multiclass->model.class_names()},
                              {"model_version", parts_.multiclass->version},
                              {"backbone", parts_.multiclass->manifest.backbone.name}};
    }
    send_json(res, 200,
              {{"symptom_catalog", cfg.symptom_catalog},
               {"threshold", cfg.threshold},
               {"positive_class", cfg.positive_class},
               {"max_upload_bytes", cfg.max_upload_bytes},
               {"poll_interval_s", cfg.poll_interval_s},
               {"age_buckets", age_buckets_to_json(cfg.age_buckets)},
               {"guidance", {{"infected", cfg.infected_guidance}, {"uninfected", cfg.uninfected_guidance}}},
               {"models", models}});
  });

  if (!cfg.static_dir.empty()) {
    if (!svr.set_mount_point("/app", cfg.static_dir.string())) {
      fail(ErrorKind::kConfigError, "static_dir " + cfg.static_dir.string() + " is not a directory");
    }
  }
}

CaseService::~CaseService() { stop(); }

int CaseService::start() {
  auto& svr = http_->server;
  const auto& cfg = parts_.config;
  if (cfg.port == 0) {
    http_->port = svr.bind_to_any_port(cfg.host);
  } else if (svr.bind_to_port(cfg.host, cfg.port)) {
    http_->port = cfg.port;
  }
  if (http_->port <= 0) {
    fail(ErrorKind::kIoError, "cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
  }
  listener_ = std::thread([this] {
    http_->server.listen_after_bind();
    std::lock_guard lock(join_mutex_);
    finished_ = true;
    finished_cv_.notify_all();
  });
  svr.wait_until_ready();
  log::info("case service listening on " + cfg.host + ":" + std::to_string(http_->port));
  return http_->port;
}

void CaseService::wait() {
  std::unique_lock lock(join_mutex_);
  if (!listener_.joinable()) return;
  finished_cv_.wait(lock, [this] { return finished_; });
  if (listener_.joinable()) listener_.join();
}

void CaseService::stop() {
  if (http_) http_->server.stop();
  wait();
}

void CaseService::run() {
  start();
  wait();
}

}  // namespace itmainn::service
