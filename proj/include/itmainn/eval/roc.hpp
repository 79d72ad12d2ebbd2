#pragma once

#include <span>
#include <vector>

namespace itmainn::eval {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;

  bool operator==(const RocPoint&) const = default;
};

// points[i] is the operating point when every score >= thresholds[i] is
// called positive. The first point (0, 0) carries +infinity.
struct RocCurve {
  std::vector<RocPoint> points;
  std::vector<double> thresholds;
};

struct RocResult {
  RocCurve curve;
  double auc = 0.0;
};

// Sweeps the distinct scores in descending order. The area is the trapezoid
// sum over consecutive points, accumulated on integer counts so the result
// is exact up to the final division.
RocResult roc_auc(std::span<const double> positive_scores, std::span<const int> labels);

// Trapezoid sum over an explicit curve.
double trapezoid_auc(std::span<const RocPoint> points);

}  // namespace itmainn::eval
