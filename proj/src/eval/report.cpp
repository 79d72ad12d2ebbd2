#include "itmainn/eval/report.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "itmainn/core/error.hpp"

namespace itmainn::eval {
namespace {

constexpr std::array<const char*, 6> kColumns = {"Accuracy", "Precision", "F1-score", "Recall", "Loss", "AUC"};

std::string four_decimals(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

ReportFormat parse_report_format(std::string_view text) {
  if (text == "csv") return ReportFormat::kCsv;
  if (text == "markdown" || text == "md") return ReportFormat::kMarkdown;
  fail(ErrorKind::kInvalidArgument, "unknown report format '" + std::string(text) + "'");
}

LossColumn parse_loss_column(std::string_view text) {
  if (text == "cross_entropy" || text == "ce") return LossColumn::kCrossEntropy;
  if (text == "mse") return LossColumn::kMse;
  fail(ErrorKind::kInvalidArgument, "unknown loss column '" + std::string(text) + "'");
}

std::string_view to_string(LossColumn column) {
  return column == LossColumn::kCrossEntropy ? "cross_entropy" : "mse";
}

std::string render_report(const std::vector<NamedReport>& reports, ReportFormat format, LossColumn loss) {
  if (reports.empty()) fail(ErrorKind::kEmptyReportSet, "no reports to render");

  const std::size_t rows = reports.size();
  std::vector<std::array<std::string, 6>> cells(rows);
  std::vector<std::array<double, 6>> values(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& r = reports[i].second;
    const double loss_value = loss == LossColumn::kCrossEntropy ? r.cross_entropy_loss : r.mse_loss;
    values[i] = {r.accuracy, r.precision, r.f1, r.recall, loss_value, r.auc};
    for (std::size_t c = 0; c < 6; ++c) cells[i][c] = four_decimals(values[i][c]);
  }

  // Best per column compared on the printed value so visible ties flag alike.
  std::array<std::string, 6> best;
  for (std::size_t c = 0; c < 6; ++c) {
    const bool lower_is_better = c == 4;
    double best_value = std::nan("");
    for (std::size_t i = 0; i < rows; ++i) {
      if (!std::isfinite(values[i][c])) continue;
      const double shown = std::stod(cells[i][c]);
      if (std::isnan(best_value) || (lower_is_better ? shown < best_value : shown > best_value)) best_value = shown;
    }
    best[c] = std::isnan(best_value) ? "" : four_decimals(best_value);
  }

  std::ostringstream out;
  if (format == ReportFormat::kCsv) {
    out << kCsvHeader << '\n';
    for (std::size_t i = 0; i < rows; ++i) {
      out << reports[i].first;
      for (std::size_t c = 0; c < 6; ++c) {
        out << ',' << cells[i][c];
        if (!best[c].empty() && cells[i][c] == best[c]) out << '*';
      }
      out << '\n';
    }
  } else {
    out << "| Model name |";
    for (const char* column : kColumns) out << ' ' << column << " |";
    out << "\n|---|";
    for (std::size_t c = 0; c < 6; ++c) out << "---|";
    out << '\n';
    for (std::size_t i = 0; i < rows; ++i) {
      out << "| " << reports[i].first << " |";
      for (std::size_t c = 0; c < 6; ++c) {
        const bool flagged = !best[c].empty() && cells[i][c] == best[c];
        out << ' ' << (flagged ? "**" + cells[i][c] + "**" : cells[i][c]) << " |";
      }
      out << '\n';
    }
  }
  return out.str();
}

nlohmann::json fold_report_json(int fold, const MetricReport& report) {
  return {{"fold", fold}, {"metrics", report.to_json()}};
}

}  // namespace itmainn::eval
