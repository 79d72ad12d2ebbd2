#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace itmainn::eval {

// One row per sample. Binary scores are stored as [1 - p, p].
struct PredictionBatch {
  std::vector<std::string> ids;
  std::vector<int> true_labels;
  std::vector<int> predicted_labels;
  std::vector<std::vector<double>> scores;

  std::size_t size() const { return true_labels.size(); }
  void validate(int n_classes) const;

  // Derives predicted labels from probability rows: binary uses
  // p(positive) >= threshold, multiclass the first maximal score.
  static PredictionBatch from_scores(std::vector<std::string> ids, std::vector<int> true_labels,
                                     std::vector<std::vector<double>> scores, double threshold = 0.5);
};

int decide_label(std::span<const double> scores, double threshold = 0.5);

// Rows are true labels, columns predicted labels.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int n_classes);

  int n_classes() const { return n_; }
  std::int64_t at(int truth, int predicted) const { return counts_[index(truth, predicted)]; }
  void add(int truth, int predicted, std::int64_t count = 1);

  std::int64_t total() const;
  std::int64_t row_sum(int c) const;
  std::int64_t col_sum(int c) const;
  std::int64_t trace() const;

  // One-vs-rest components for class c.
  std::int64_t tp(int c) const { return at(c, c); }
  std::int64_t fn(int c) const { return row_sum(c) - tp(c); }
  std::int64_t fp(int c) const { return col_sum(c) - tp(c); }
  std::int64_t tn(int c) const { return total() - tp(c) - fn(c) - fp(c); }

  std::vector<std::vector<std::int64_t>> rows() const;
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t index(int truth, int predicted) const {
    return static_cast<std::size_t>(truth) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(predicted);
  }

  int n_;
  std::vector<std::int64_t> counts_;
};

ConfusionMatrix confusion(const PredictionBatch& batch, int n_classes);

enum class Averaging { kBinary, kWeighted, kMacro };

std::string_view to_string(Averaging averaging);
Averaging parse_averaging(std::string_view text);
Averaging default_averaging(int n_classes);

struct MetricReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  double cross_entropy_loss = 0.0;
  double mse_loss = 0.0;
  Averaging averaging = Averaging::kBinary;
  std::int64_t n_samples = 0;
  // Zero-division substitutions and undefined AUCs end up here.
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& doc);
};

// Probabilities are clipped to [kProbabilityFloor, 1] before taking logs.
constexpr double kProbabilityFloor = 1e-15;

MetricReport compute_metrics(const ConfusionMatrix& cm, const PredictionBatch& batch, Averaging averaging);
MetricReport evaluate(const PredictionBatch& batch, int n_classes, Averaging averaging);
inline MetricReport evaluate(const PredictionBatch& batch, int n_classes) {
  return evaluate(batch, n_classes, default_averaging(n_classes));
}

// Unweighted mean of every metric; n_samples is summed.
MetricReport mean_report(const std::vector<MetricReport>& reports);

}  // namespace itmainn::eval
