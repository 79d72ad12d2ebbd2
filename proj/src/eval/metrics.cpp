#include "itmainn/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "itmainn/core/error.hpp"
#include "itmainn/eval/roc.hpp"

namespace itmainn::eval {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kRowSumTolerance = 1e-6;

double ratio(std::int64_t num, std::int64_t den) {
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

void PredictionBatch::validate(int n_classes) const {
  const std::size_t n = true_labels.size();
  if (predicted_labels.size() != n || (!ids.empty() && ids.size() != n) || (!scores.empty() && scores.size() != n)) {
    fail(ErrorKind::kInvalidArgument, "prediction batch fields differ in length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (true_labels[i] < 0 || true_labels[i] >= n_classes || predicted_labels[i] < 0 ||
        predicted_labels[i] >= n_classes) {
      fail(ErrorKind::kLabelOutOfRange, "label outside [0, " + std::to_string(n_classes) + ") at row " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& row = scores[i];
    if (row.size() != static_cast<std::size_t>(n_classes)) {
      fail(ErrorKind::kInvalidArgument, "score row " + std::to_string(i) + " has wrong width");
    }
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= -kRowSumTolerance && p <= 1.0 + kRowSumTolerance)) {
        fail(ErrorKind::kInvalidArgument, "score outside [0, 1] at row " + std::to_string(i));
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      fail(ErrorKind::kInvalidArgument, "score row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

int decide_label(std::span<const double> scores, double threshold) {
  if (scores.size() == 2) return scores[1] >= threshold ? 1 : 0;
  return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

PredictionBatch PredictionBatch::from_scores(std::vector<std::string> ids, std::vector<int> true_labels,
                                             std::vector<std::vector<double>> scores, double threshold) {
  PredictionBatch batch;
  batch.ids = std::move(ids);
  batch.true_labels = std::move(true_labels);
  batch.scores = std::move(scores);
  batch.predicted_labels.reserve(batch.scores.size());
  for (const auto& row : batch.scores) batch.predicted_labels.push_back(decide_label(row, threshold));
  return batch;
}

ConfusionMatrix::ConfusionMatrix(int n_classes) : n_(n_classes) {
  if (n_classes < 2) fail(ErrorKind::kInvalidArgument, "a confusion matrix needs at least 2 classes");
  counts_.assign(static_cast<std::size_t>(n_classes) * static_cast<std::size_t>(n_classes), 0);
}

void ConfusionMatrix::add(int truth, int predicted, std::int64_t count) {
  if (truth < 0 || truth >= n_ || predicted < 0 || predicted >= n_) {
    fail(ErrorKind::kLabelOutOfRange, "label outside [0, " + std::to_string(n_) + ")");
  }
  counts_[index(truth, predicted)] += count;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t sum = 0;
  for (auto v : counts_) sum += v;
  return sum;
}

std::int64_t ConfusionMatrix::row_sum(int c) const {
  std::int64_t sum = 0;
  for (int j = 0; j < n_; ++j) sum += at(c, j);
  return sum;
}

std::int64_t ConfusionMatrix::col_sum(int c) const {
  std::int64_t sum = 0;
  for (int i = 0; i < n_; ++i) sum += at(i, c);
  return sum;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t sum = 0;
  for (int c = 0; c < n_; ++c) sum += at(c, c);
  return sum;
}

std::vector<std::vector<std::int64_t>> ConfusionMatrix::rows() const {
  std::vector<std::vector<std::int64_t>> out(static_cast<std::size_t>(n_));
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) out[static_cast<std::size_t>(i)].push_back(at(i, j));
  }
  return out;
}

ConfusionMatrix confusion(const PredictionBatch& batch, int n_classes) {
  if (batch.size() == 0) fail(ErrorKind::kEmptyBatch, "no predictions");
  batch.validate(n_classes);
  ConfusionMatrix cm(n_classes);
  for (std::size_t i = 0; i < batch.size(); ++i) cm.add(batch.true_labels[i], batch.predicted_labels[i]);
  return cm;
}

std::string_view to_string(Averaging averaging) {
  switch (averaging) {
    case Averaging::kBinary: return "binary";
    case Averaging::kWeighted: return "weighted";
    case Averaging::kMacro: return "macro";
  }
  return "binary";
}

Averaging parse_averaging(std::string_view text) {
  if (text == "binary") return Averaging::kBinary;
  if (text == "weighted") return Averaging::kWeighted;
  if (text == "macro") return Averaging::kMacro;
  fail(ErrorKind::kInvalidArgument, "unknown averaging '" + std::string(text) + "'");
}

Averaging default_averaging(int n_classes) { return n_classes == 2 ? Averaging::kBinary : Averaging::kWeighted; }

MetricReport compute_metrics(const ConfusionMatrix& cm, const PredictionBatch& batch, Averaging averaging) {
  const int n_classes = cm.n_classes();
  if (cm.total() == 0) fail(ErrorKind::kEmptyBatch, "no predictions");
  if (cm.total() != static_cast<std::int64_t>(batch.size())) {
    fail(ErrorKind::kInvalidArgument, "confusion matrix and batch disagree on sample count");
  }
  if (averaging == Averaging::kBinary && n_classes != 2) {
    fail(ErrorKind::kInvalidArgument, "binary averaging needs exactly 2 classes");
  }
  batch.validate(n_classes);

  MetricReport report;
  report.averaging = averaging;
  report.n_samples = cm.total();
  report.accuracy = ratio(cm.trace(), cm.total());

  std::vector<double> precision(static_cast<std::size_t>(n_classes));
  std::vector<double> recall(static_cast<std::size_t>(n_classes));
  std::vector<double> f1(static_cast<std::size_t>(n_classes));
  std::vector<bool> precision_undefined(static_cast<std::size_t>(n_classes), false);
  std::vector<bool> recall_undefined(static_cast<std::size_t>(n_classes), false);
  for (int c = 0; c < n_classes; ++c) {
    const auto k = static_cast<std::size_t>(c);
    const std::int64_t predicted = cm.tp(c) + cm.fp(c);
    const std::int64_t actual = cm.tp(c) + cm.fn(c);
    precision_undefined[k] = predicted == 0;
    recall_undefined[k] = actual == 0;
    precision[k] = predicted == 0 ? 0.0 : ratio(cm.tp(c), predicted);
    recall[k] = actual == 0 ? 0.0 : ratio(cm.tp(c), actual);
    const double pr_sum = precision[k] + recall[k];
    f1[k] = pr_sum == 0.0 ? 0.0 : 2.0 * precision[k] * recall[k] / pr_sum;
  }
  auto note_undefined = [&](int c) {
    const auto k = static_cast<std::size_t>(c);
    if (precision_undefined[k]) {
      report.warnings.push_back("precision undefined for class " + std::to_string(c) + " (no predictions); using 0");
    }
    if (recall_undefined[k]) {
      report.warnings.push_back("recall undefined for class " + std::to_string(c) + " (no samples); using 0");
    }
  };

  switch (averaging) {
    case Averaging::kBinary:
      report.precision = precision[1];
      report.recall = recall[1];
      report.f1 = f1[1];
      note_undefined(1);
      break;
    case Averaging::kWeighted:
    case Averaging::kMacro: {
      const double total = static_cast<double>(cm.total());
      for (int c = 0; c < n_classes; ++c) {
        const auto k = static_cast<std::size_t>(c);
        const double weight =
            averaging == Averaging::kWeighted ? static_cast<double>(cm.row_sum(c)) / total : 1.0 / n_classes;
        report.precision += weight * precision[k];
        report.recall += weight * recall[k];
        report.f1 += weight * f1[k];
        if (averaging == Averaging::kMacro || cm.row_sum(c) > 0) note_undefined(c);
      }
      break;
    }
  }

  if (batch.scores.empty()) {
    report.cross_entropy_loss = report.mse_loss = report.auc = kNaN;
    report.warnings.push_back("no scores supplied; losses and AUC undefined");
    return report;
  }

  double ce = 0.0;
  double se = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& row = batch.scores[i];
    const auto y = static_cast<std::size_t>(batch.true_labels[i]);
    ce -= std::log(std::max(row[y], kProbabilityFloor));
    for (std::size_t c = 0; c < row.size(); ++c) {
      const double target = c == y ? 1.0 : 0.0;
      se += (target - row[c]) * (target - row[c]);
    }
  }
  const double n = static_cast<double>(batch.size());
  report.cross_entropy_loss = ce / n;
  // Mean over all N x C entries, which reduces to mean (y - p)^2 for binary.
  report.mse_loss = se / (n * n_classes);

  auto class_auc = [&](int c) -> double {
    std::vector<double> s(batch.size());
    std::vector<int> y(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      s[i] = batch.scores[i][static_cast<std::size_t>(c)];
      y[i] = batch.true_labels[i] == c ? 1 : 0;
    }
    return roc_auc(s, y).auc;
  };

  if (n_classes == 2 && averaging == Averaging::kBinary) {
    if (cm.row_sum(0) == 0 || cm.row_sum(1) == 0) {
      report.auc = kNaN;
      report.warnings.push_back("AUC undefined: batch holds a single class");
    } else {
      report.auc = class_auc(1);
    }
  } else {
    double weighted = 0.0;
    double weight_sum = 0.0;
    for (int c = 0; c < n_classes; ++c) {
      const std::int64_t support = cm.row_sum(c);
      if (support == 0 || support == cm.total()) {
        report.warnings.push_back("AUC for class " + std::to_string(c) + " undefined; excluded from the average");
        continue;
      }
      const double w = averaging == Averaging::kMacro ? 1.0 : static_cast<double>(support);
      weighted += w * class_auc(c);
      weight_sum += w;
    }
    report.auc = weight_sum > 0.0 ? weighted / weight_sum : kNaN;
  }
  return report;
}

MetricReport evaluate(const PredictionBatch& batch, int n_classes, Averaging averaging) {
  return compute_metrics(confusion(batch, n_classes), batch, averaging);
}

MetricReport mean_report(const std::vector<MetricReport>& reports) {
  if (reports.empty()) fail(ErrorKind::kEmptyReportSet, "nothing to average");
  MetricReport out;
  out.averaging = reports.front().averaging;
  const double k = static_cast<double>(reports.size());
  for (const auto& r : reports) {
    out.accuracy += r.accuracy;
    out.precision += r.precision;
    out.recall += r.recall;
    out.f1 += r.f1;
    out.auc += r.auc;
    out.cross_entropy_loss += r.cross_entropy_loss;
    out.mse_loss += r.mse_loss;
    out.n_samples += r.n_samples;
  }
  out.accuracy /= k;
  out.precision /= k;
  out.recall /= k;
  out.f1 /= k;
  out.auc /= k;
  out.cross_entropy_loss /= k;
  out.mse_loss /= k;
  return out;
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
double number_or_nan(const nlohmann::json& doc, const char* key) {
  const auto& v = doc.at(key);
  return v.is_null() ? kNaN : v.get<double>();
}

}  // namespace

nlohmann::json MetricReport::to_json() const {
  return {{"accuracy", number_or_null(accuracy)},
          {"precision", number_or_null(precision)},
          {"recall", number_or_null(recall)},
          {"f1", number_or_null(f1)},
          {"auc", number_or_null(auc)},
          {"cross_entropy_loss", number_or_null(cross_entropy_loss)},
          {"mse_loss", number_or_null(mse_loss)},
          {"averaging", to_string(averaging)},
          {"n_samples", n_samples},
          {"warnings", warnings}};
}

MetricReport MetricReport::from_json(const nlohmann::json& doc) {
  try {
    MetricReport r;
    r.accuracy = number_or_nan(doc, "accuracy");
    r.precision = number_or_nan(doc, "precision");
    r.recall = number_or_nan(doc, "recall");
    r.f1 = number_or_nan(doc, "f1");
    r.auc = number_or_nan(doc, "auc");
    r.cross_entropy_loss = number_or_nan(doc, "cross_entropy_loss");
    r.mse_loss = number_or_nan(doc, "mse_loss");
    r.averaging = parse_averaging(doc.value("averaging", std::string("binary")));
    r.n_samples = doc.value("n_samples", std::int64_t{0});
    r.warnings = doc.value("warnings", std::vector<std::string>{});
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfigError, std::string("malformed metric report: ") + e.what());
  }
}

}  // namespace itmainn::eval
