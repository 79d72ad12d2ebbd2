#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include <gtest/gtest.h>

#include "itmainn/core/error.hpp"
#include "itmainn/core/random.hpp"
#include "itmainn/service/geo.hpp"

namespace {

using namespace itmainn;
using namespace itmainn::service;

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kInvalidArgument;
}

// Chord length between unit vectors, converted to arc length.
double chord_oracle(LatLon a, LatLon b) {
  const double d2r = std::numbers::pi / 180.0;
  auto unit = [&](LatLon p) {
    return std::array<double, 3>{std::cos(p.lat * d2r) * std::cos(p.lon * d2r),
                                 std::cos(p.lat * d2r) * std::sin(p.lon * d2r), std::sin(p.lat * d2r)};
  };
  const auto u = unit(a), v = unit(b);
  const double chord = std::sqrt((u[0] - v[0]) * (u[0] - v[0]) + (u[1] - v[1]) * (u[1] - v[1]) +
                                 (u[2] - v[2]) * (u[2] - v[2]));
  return 2.0 * 6371.0 * std::asin(std::min(1.0, chord / 2.0));
}

LatLon random_point(Rng& rng) { return {rng.uniform(-90.0, 90.0), rng.uniform(-180.0, 180.0)}; }

TEST(Haversine, TaifToMeccaMatchesChordOracle) {
  const LatLon taif{21.2854, 40.4248}, mecca{21.3891, 39.8579};
  const double oracle = chord_oracle(taif, mecca);
  EXPECT_NEAR(oracle, 60.0, 1.0);
  EXPECT_NEAR(haversine(taif, mecca), oracle, 0.5);
}

TEST(Haversine, AntipodesArePiR) {
  const double pi_r = std::numbers::pi * 6371.0;
  EXPECT_NEAR(haversine({0, 0}, {0, 180}), pi_r, 1e-6);
  EXPECT_NEAR(haversine({45, 10}, {-45, -170}), pi_r, 1e-6);
  EXPECT_NEAR(haversine({90, 0}, {-90, 0}), pi_r, 1e-6);
  EXPECT_NEAR(pi_r, 20015.1, 0.05);
}

TEST(Haversine, MetricProperties) {
  Rng rng(11);
  for (int t = 0; t < 1000; ++t) {
    const auto a = random_point(rng), b = random_point(rng);
    const double ab = haversine(a, b);
    EXPECT_GE(ab, 0.0);
    EXPECT_DOUBLE_EQ(ab, haversine(b, a));
    EXPECT_NEAR(haversine(a, a), 0.0, 1e-9);
    EXPECT_NEAR(ab, chord_oracle(a, b), 1e-6);
    if (!(a == b)) EXPECT_GT(ab, 1e-9);
  }
}

TEST(Haversine, RejectsOutOfRange) {
  EXPECT_EQ(kind_of([] { haversine({91, 0}, {0, 0}); }), ErrorKind::kCoordinateOutOfRange);
  EXPECT_EQ(kind_of([] { haversine({0, 0}, {0, -180.5}); }), ErrorKind::kCoordinateOutOfRange);
  EXPECT_EQ(kind_of([] { haversine({NAN, 0}, {0, 0}); }), ErrorKind::kCoordinateOutOfRange);
}

std::vector<HealthCenter> random_registry(Rng& rng, int n) {
  std::vector<HealthCenter> reg;
  for (int i = 0; i < n; ++i) {
    // Some centers share coordinates so the id tie-break is exercised.
    LatLon p = (i > 0 && rng.bernoulli(0.2)) ? reg[rng.uniform_index(reg.size())].location : random_point(rng);
    reg.push_back({"c" + std::to_string(rng.uniform_index(1000000)) + "-" + std::to_string(i), "Center " + std::to_string(i),
                   p, ""});
  }
  return reg;
}

TEST(NearestCenters, MatchesBruteForceSortOn50Registries) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto reg = random_registry(rng, 50);
    const auto origin = random_point(rng);
    const int limit = static_cast<int>(rng.uniform_int(1, 60));

    std::vector<std::pair<double, std::string>> oracle;
    for (const auto& c : reg) oracle.emplace_back(haversine(origin, c.location), c.center_id);
    std::sort(oracle.begin(), oracle.end());
    oracle.resize(std::min<std::size_t>(oracle.size(), static_cast<std::size_t>(limit)));

    const auto got = nearest_centers(reg, origin, limit);
    ASSERT_EQ(got.size(), oracle.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].center.center_id, oracle[i].second);
      EXPECT_EQ(got[i].distance_km, oracle[i].first);
    }
  }
}

TEST(NearestCenters, OriginAtCenterAndLimitOne) {
  std::vector<HealthCenter> reg{{"b", "B", {10, 10}, ""}, {"a", "A", {21.3891, 39.8579}, ""}, {"c", "C", {-5, 3}, ""}};
  const auto all = nearest_centers(reg, {21.3891, 39.8579}, 10);
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[0].center.center_id, "a");
  EXPECT_EQ(all[0].distance_km, 0.0);
  const auto one = nearest_centers(reg, {9, 9}, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].center.center_id, "b");
}

TEST(NearestCenters, Errors) {
  EXPECT_EQ(kind_of([] { nearest_centers({}, {0, 0}, 1); }), ErrorKind::kEmptyRegistry);
  std::vector<HealthCenter> reg{{"a", "A", {0, 0}, ""}};
  EXPECT_EQ(kind_of([&] { nearest_centers(reg, {0, 0}, 0); }), ErrorKind::kInvalidArgument);
  EXPECT_EQ(kind_of([&] { nearest_centers(reg, {100, 0}, 1); }), ErrorKind::kCoordinateOutOfRange);
}

TEST(HealthCenterCsv, ParsesQuotedFields) {
  const std::string csv =
      "center_id,name,lat,lon,contact\n"
      "mk1,\"King Abdullah Hospital, Mecca\",21.3891,39.8579,\"+966 12 \"\"555\"\"\"\r\n"
      "\n"
      "tf1,Taif Clinic,21.2854,40.4248,\n";
  const auto centers = parse_health_centers_csv(csv, "centers.csv");
  ASSERT_EQ(centers.size(), 2u);
  EXPECT_EQ(centers[0].name, "King Abdullah Hospital, Mecca");
  EXPECT_EQ(centers[0].contact, "+966 12 \"555\"");
  EXPECT_DOUBLE_EQ(centers[1].location.lon, 40.4248);
  EXPECT_EQ(centers[1].contact, "");
}

TEST(HealthCenterCsv, ErrorsCarryLineNumbers) {
  auto message = [](const std::string& csv) {
    try {
      parse_health_centers_csv(csv, "c.csv");
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kConfigError);
      return e.detail();
    }
    return std::string("no error");
  };
  EXPECT_NE(message("id,name\n").find("c.csv:1"), std::string::npos);
  const std::string header = "center_id,name,lat,lon,contact\n";
  EXPECT_NE(message(header + "a,A,1,2,x\nb,B,95,2,x\n").find("c.csv:3"), std::string::npos);
  EXPECT_NE(message(header + "a,,1,2,x\n").find("c.csv:2"), std::string::npos);
  EXPECT_NE(message(header + "a,A,north,2,x\n").find("not a number"), std::string::npos);
  EXPECT_NE(message(header + "a,A,1,2\n").find("expected 5 fields"), std::string::npos);
  EXPECT_NE(message(header + "a,A,1,2,x\na,B,1,2,x\n").find("duplicate"), std::string::npos);
}

}  // namespace
