#include "itmainn/eval/roc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "itmainn/core/error.hpp"

namespace itmainn::eval {

RocResult roc_auc(std::span<const double> positive_scores, std::span<const int> labels) {
  if (positive_scores.size() != labels.size()) {
    fail(ErrorKind::kInvalidArgument, "scores and labels differ in length");
  }
  std::int64_t positives = 0;
  std::int64_t negatives = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      ++positives;
    } else if (labels[i] == 0) {
      ++negatives;
    } else {
      fail(ErrorKind::kLabelOutOfRange, "binary labels must be 0 or 1");
    }
    if (std::isnan(positive_scores[i])) fail(ErrorKind::kInvalidArgument, "NaN score");
  }
  if (positives == 0 || negatives == 0) {
    fail(ErrorKind::kSingleClassBatch, "ROC needs both classes present");
  }

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return positive_scores[a] > positive_scores[b]; });

  RocResult result;
  result.curve.points.push_back({0.0, 0.0});
  result.curve.thresholds.push_back(std::numeric_limits<double>::infinity());
  std::int64_t tp = 0, fp = 0;
  // Twice the area in units of (1/N) x (1/P).
  std::int64_t twice_area = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = positive_scores[order[i]];
    const std::int64_t prev_tp = tp, prev_fp = fp;
    while (i < order.size() && positive_scores[order[i]] == threshold) {
      if (labels[order[i]] == 1) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    twice_area += (fp - prev_fp) * (tp + prev_tp);
    result.curve.points.push_back(
        {static_cast<double>(fp) / static_cast<double>(negatives), static_cast<double>(tp) / static_cast<double>(positives)});
    result.curve.thresholds.push_back(threshold);
  }
  result.auc = static_cast<double>(twice_area) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
  return result;
}

double trapezoid_auc(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    area += (points[i + 1].fpr - points[i].fpr) * (points[i + 1].tpr + points[i].tpr) / 2.0;
  }
  return area;
}

}  // namespace itmainn::eval
