#pragma once

#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "itmainn/core/error.hpp"
#include "itmainn/service/case_store.hpp"
#include "itmainn/service/classify.hpp"
#include "itmainn/service/config.hpp"
#include "itmainn/service/geo.hpp"

namespace itmainn::service {

inline constexpr const char* kApiPrefix = "/api/v1";

// HTTP status for a library error kind.
int http_status(ErrorKind kind);

struct ServiceParts {
  ServiceConfig config;
  std::shared_ptr<const Deployment> binary;
  std::shared_ptr<const Deployment> multiclass;
  std::shared_ptr<CaseStore> store;
  std::vector<HealthCenter> centers;
};

// Loads bundles, opens the store and reads the health-center registry.
ServiceParts open_service_parts(const ServiceConfig& config);

class CaseService {
 public:
  explicit CaseService(ServiceParts parts);
  ~CaseService();
  CaseService(const CaseService&) = delete;
  CaseService& operator=(const CaseService&) = delete;

  // Binds config.host:config.port (0 picks a free port) and serves on a
  // background thread. Returns the bound port.
  int start();
  // Blocks until stop() or a fatal listener error.
  void wait();
  void stop();
  // start() then wait().
  void run();

  const ServiceParts& parts() const { return parts_; }

 private:
  struct Http;
  ServiceParts parts_;
  std::unique_ptr<Http> http_;
  std::thread listener_;
  // wait() and stop() may run on different threads; only one joins.
  std::mutex join_mutex_;
  std::condition_variable finished_cv_;
  bool finished_ = false;
};

}  // namespace itmainn::service
