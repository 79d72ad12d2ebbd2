#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "itmainn/eval/metrics.hpp"

namespace itmainn::eval {

enum class ReportFormat { kCsv, kMarkdown };
enum class LossColumn { kCrossEntropy, kMse };

ReportFormat parse_report_format(std::string_view text);
LossColumn parse_loss_column(std::string_view text);
std::string_view to_string(LossColumn column);

using NamedReport = std::pair<std::string, MetricReport>;

inline constexpr std::string_view kCsvHeader = "model,accuracy,precision,f1,recall,loss,auc";

// One row per model in input order, values to 4 decimals. The best value of
// each column (highest, lowest for loss) is flagged: "*" suffix in CSV, bold
// in markdown. Ties at the printed precision are all flagged.
std::string render_report(const std::vector<NamedReport>& reports, ReportFormat format,
                          LossColumn loss = LossColumn::kCrossEntropy);

nlohmann::json fold_report_json(int fold, const MetricReport& report);

}  // namespace itmainn::eval
