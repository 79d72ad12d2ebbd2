#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "itmainn/service/case_store.hpp"

namespace itmainn::service {

struct AgeBucket {
  std::string label;
  int min_age = 0;
  std::optional<int> max_age;  // inclusive; open-ended when empty
  bool contains(int age) const { return age >= min_age && (!max_age || age <= *max_age); }
};

// 0-12, 13-17, 18-39, 40-64, 65+.
std::vector<AgeBucket> default_age_buckets();
// Throws InvalidArgument unless buckets start at 0, are contiguous and the
// last one is open-ended.
void validate_age_buckets(const std::vector<AgeBucket>& buckets);
nlohmann::json age_buckets_to_json(const std::vector<AgeBucket>& buckets);
std::vector<AgeBucket> age_buckets_from_json(const nlohmann::json& doc);

struct DashboardOptions {
  std::string positive_class = "Monkeypox";
  std::vector<std::string> symptom_catalog = default_symptom_catalog();
  std::vector<AgeBucket> age_buckets = default_age_buckets();
};

inline constexpr const char* kUnspecifiedGender = "unspecified";
inline constexpr const char* kUnknownAge = "unknown";

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
  bool infected = false;
  bool operator==(const GeoPoint&) const = default;
};

// Demographic and symptom figures describe infected cases only: gender and
// symptom values are fractions of infected_count, the age histogram counts
// infected cases. Every ratio is 0 when there are no infected cases.
struct DashboardSnapshot {
  std::size_t total_cases = 0;
  std::size_t infected_count = 0;
  std::size_t uninfected_count = 0;
  double infection_rate = 0.0;
  std::vector<std::pair<std::string, double>> gender_breakdown;  // male, female, other, unspecified
  std::vector<std::pair<std::string, std::size_t>> age_histogram;  // bucket order, then unknown
  std::vector<std::pair<std::string, double>> symptom_prevalence;  // catalog order
  std::vector<GeoPoint> geo_points;
  std::string generated_at;

  nlohmann::json to_json() const;
  // Equality ignoring generated_at.
  bool same_figures(const DashboardSnapshot& other) const;
};

DashboardSnapshot summarize(const std::vector<CaseRecord>& records, const DashboardOptions& options,
                            std::string generated_at);

// Aggregates over one consistent read of the store. Opted-out records never
// contribute.
DashboardSnapshot dashboard_summary(const CaseStore& store, CaseFilter filter, const DashboardOptions& options);

}  // namespace itmainn::service
