#include "itmainn/service/dashboard.hpp"

#include <algorithm>
#include <chrono>

#include "itmainn/core/error.hpp"
#include "itmainn/core/io.hpp"

namespace itmainn::service {

using nlohmann::json;

std::vector<AgeBucket> default_age_buckets() {
  return {{"0-12", 0, 12}, {"13-17", 13, 17}, {"18-39", 18, 39}, {"40-64", 40, 64}, {"65+", 65, std::nullopt}};
}

void validate_age_buckets(const std::vector<AgeBucket>& buckets) {
  if (buckets.empty()) fail(ErrorKind::kInvalidArgument, "age buckets must not be empty");
  int next = 0;
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    const auto& b = buckets[i];
    if (b.label.empty() || b.label == kUnknownAge) {
      fail(ErrorKind::kInvalidArgument, "age bucket " + std::to_string(i) + " has a reserved or empty label");
    }
    if (b.min_age != next) {
      fail(ErrorKind::kInvalidArgument, "age bucket " + b.label + " must start at " + std::to_string(next));
    }
    const bool last = i + 1 == buckets.size();
    if (last != !b.max_age.has_value()) {
      fail(ErrorKind::kInvalidArgument, "only the last age bucket is open-ended");
    }
    if (b.max_age) {
      if (*b.max_age < b.min_age) fail(ErrorKind::kInvalidArgument, "age bucket " + b.label + " is empty");
      next = *b.max_age + 1;
    }
  }
}

json age_buckets_to_json(const std::vector<AgeBucket>& buckets) {
  json out = json::array();
  for (const auto& b : buckets) {
    out.push_back({{"label", b.label}, {"min", b.min_age}, {"max", b.max_age ? json(*b.max_age) : json(nullptr)}});
  }
  return out;
}

std::vector<AgeBucket> age_buckets_from_json(const json& doc) {
  std::vector<AgeBucket> out;
  for (const auto& b : doc) {
    AgeBucket bucket{b.at("label").get<std::string>(), b.at("min").get<int>(), std::nullopt};
    if (b.contains("max") && !b.at("max").is_null()) bucket.max_age = b.at("max").get<int>();
    out.push_back(std::move(bucket));
  }
  validate_age_buckets(out);
  return out;
}

json DashboardSnapshot::to_json() const {
  json gender = json::object();
  for (const auto& [k, v] : gender_breakdown) gender[k] = v;
  json ages = json::array();
  for (const auto& [k, v] : age_histogram) ages.push_back({{"bucket", k}, {"count", v}});
  json symptoms = json::object();
  for (const auto& [k, v] : symptom_prevalence) symptoms[k] = v;
  json points = json::array();
  for (const auto& p : geo_points) points.push_back({{"lat", p.lat}, {"lon", p.lon}, {"infected", p.infected}});
  return {{"total_cases", total_cases},
          {"infected_count", infected_count},
          {"uninfected_count", uninfected_count},
          {"infection_rate", infection_rate},
          {"gender_breakdown", gender},
          {"age_histogram", ages},
          {"symptom_prevalence", symptoms},
          {"geo_points", points},
          {"generated_at", generated_at}};
}

bool DashboardSnapshot::same_figures(const DashboardSnapshot& o) const {
  return total_cases == o.total_cases && infected_count == o.infected_count &&
         uninfected_count == o.uninfected_count && infection_rate == o.infection_rate &&
         gender_breakdown == o.gender_breakdown && age_histogram == o.age_histogram &&
         symptom_prevalence == o.symptom_prevalence && geo_points == o.geo_points;
}

DashboardSnapshot summarize(const std::vector<CaseRecord>& records, const DashboardOptions& options,
                            std::string generated_at) {
  DashboardSnapshot s;
  s.generated_at = std::move(generated_at);
  s.total_cases = records.size();

  std::vector<std::size_t> gender_counts(4, 0);
  std::vector<std::size_t> age_counts(options.age_buckets.size() + 1, 0);
  std::vector<std::size_t> symptom_counts(options.symptom_catalog.size(), 0);

  for (const auto& r : records) {
    const bool infected = r.prediction == options.positive_class;
    if (r.location) s.geo_points.push_back({r.location->lat, r.location->lon, infected});
    if (!infected) continue;
    ++s.infected_count;
    gender_counts[r.gender ? static_cast<std::size_t>(*r.gender) : 3]++;
    std::size_t age_slot = options.age_buckets.size();
    if (r.age) {
      for (std::size_t b = 0; b < options.age_buckets.size(); ++b) {
        if (options.age_buckets[b].contains(*r.age)) {
          age_slot = b;
          break;
        }
      }
    }
    age_counts[age_slot]++;
    for (std::size_t k = 0; k < options.symptom_catalog.size(); ++k) {
      if (std::binary_search(r.symptoms.begin(), r.symptoms.end(), options.symptom_catalog[k])) {
        symptom_counts[k]++;
      }
    }
  }
  s.uninfected_count = s.total_cases - s.infected_count;
  s.infection_rate = s.total_cases > 0 ? static_cast<double>(s.infected_count) / static_cast<double>(s.total_cases) : 0.0;

  const auto ratio = [&](std::size_t n) {
    return s.infected_count > 0 ? static_cast<double>(n) / static_cast<double>(s.infected_count) : 0.0;
  };
  const char* genders[] = {"male", "female", "other", kUnspecifiedGender};
  for (std::size_t g = 0; g < 4; ++g) s.gender_breakdown.emplace_back(genders[g], ratio(gender_counts[g]));
  for (std::size_t b = 0; b < options.age_buckets.size(); ++b) {
    s.age_histogram.emplace_back(options.age_buckets[b].label, age_counts[b]);
  }
  s.age_histogram.emplace_back(kUnknownAge, age_counts.back());
  for (std::size_t k = 0; k < options.symptom_catalog.size(); ++k) {
    s.symptom_prevalence.emplace_back(options.symptom_catalog[k], ratio(symptom_counts[k]));
  }
  return s;
}

DashboardSnapshot dashboard_summary(const CaseStore& store, CaseFilter filter, const DashboardOptions& options) {
  filter.include_opted_out = false;
  filter.infected.reset();
  return summarize(store.scan(filter), options, format_utc(std::chrono::system_clock::now()));
}

}  // namespace itmainn::service
