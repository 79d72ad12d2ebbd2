#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "itmainn/model/classifier.hpp"
#include "itmainn/train/trainer.hpp"

namespace itmainn::train {

// runs/<timestamp>-<name>/ with config.json, epoch_log.csv and
// checkpoint.pt.
class RunDirectory {
 public:
  static RunDirectory create(const std::filesystem::path& root, const std::string& name,
                             std::chrono::system_clock::time_point when = std::chrono::system_clock::now());

  const std::filesystem::path& path() const { return path_; }
  void write_config(const nlohmann::json& config) const;
  void write_epoch_log(const std::vector<EpochRecord>& log) const;
  void write_checkpoint(const model::ClassifierModel& model) const;
  void write_json(const std::string& file, const nlohmann::json& doc) const;

 private:
  explicit RunDirectory(std::filesystem::path path) : path_(std::move(path)) {}
  std::filesystem::path path_;
};

inline constexpr const char* kEpochLogHeader = "epoch,train_loss,val_loss,val_acc";

std::string epoch_log_csv(const std::vector<EpochRecord>& log);
std::vector<EpochRecord> parse_epoch_log_csv(const std::string& text);

}  // namespace itmainn::train
