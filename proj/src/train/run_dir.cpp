#include "itmainn/train/run_dir.hpp"

#include <cstdio>
#include <sstream>

#include "itmainn/core/error.hpp"
#include "itmainn/core/io.hpp"

namespace itmainn::train {

namespace fs = std::filesystem;

RunDirectory RunDirectory::create(const fs::path& root, const std::string& name,
                                  std::chrono::system_clock::time_point when) {
  const std::string stem = compact_utc(when) + "-" + (name.empty() ? std::string("run") : name);
  fs::path path = root / stem;
  for (int n = 2; fs::exists(path); ++n) path = root / (stem + "-" + std::to_string(n));
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) fail(ErrorKind::kWriteFailure, "cannot create run directory " + path.string() + ": " + ec.message());
  return RunDirectory(path);
}

void RunDirectory::write_config(const nlohmann::json& config) const { write_json("config.json", config); }

void RunDirectory::write_json(const std::string& file, const nlohmann::json& doc) const {
  write_file(path_ / file, doc.dump(2) + "\n");
}

void RunDirectory::write_epoch_log(const std::vector<EpochRecord>& log) const {
  write_file(path_ / "epoch_log.csv", epoch_log_csv(log));
}

void RunDirectory::write_checkpoint(const model::ClassifierModel& model) const {
  torch::serialize::OutputArchive archive;
  model.net()->save(archive);
  std::ostringstream out;
  archive.save_to(out);
  write_file(path_ / "checkpoint.pt", out.str());
}

std::string epoch_log_csv(const std::vector<EpochRecord>& log) {
  std::string out = std::string(kEpochLogHeader) + "\n";
  char buf[160];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_loss, r.val_accuracy);
    out += buf;
  }
  return out;
}

std::vector<EpochRecord> parse_epoch_log_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kEpochLogHeader) fail(ErrorKind::kConfigError, "not an epoch log");
  std::vector<EpochRecord> log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4) fail(ErrorKind::kConfigError, "malformed epoch log row: " + line);
    log.push_back({std::stoi(cells[0]), std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3])});
  }
  return log;
}

}  // namespace itmainn::train
