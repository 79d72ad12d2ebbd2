#include <algorithm>
#include <functional>
#include <map>
#include <regex>
#include <set>
#include <thread>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "itmainn/core/io.hpp"
#include "itmainn/core/random.hpp"
#include "itmainn/service/case_store.hpp"
#include "itmainn/service/classify.hpp"
#include "itmainn/service/config.hpp"
#include "itmainn/service/dashboard.hpp"

namespace {

using namespace itmainn;
using namespace itmainn::service;
using nlohmann::json;
namespace fs = std::filesystem;
using itmainn::testing::TempDir;

const std::vector<std::string> kBinaryClasses{"Other", "Monkeypox"};

CaseRules binary_rules() {
  CaseRules r;
  r.class_names = kBinaryClasses;
  return r;
}

CaseInput input(const std::string& prediction, double confidence = 0.9) {
  return parse_case_input({{"prediction", prediction}, {"confidence", confidence}}, binary_rules());
}

std::vector<std::string> fields_of(const json& body) {
  try {
    parse_case_input(body, binary_rules());
  } catch (const ValidationError& e) {
    return e.fields();
  }
  return {};
}

TEST(CaseInput, MinimalInputLeavesOptionalFieldsEmpty) {
  const auto in = input("Monkeypox", 0.93);
  EXPECT_EQ(in.prediction, "Monkeypox");
  EXPECT_DOUBLE_EQ(in.confidence, 0.93);
  EXPECT_TRUE(in.symptoms.empty());
  EXPECT_FALSE(in.age || in.gender || in.location || in.image_png);
  EXPECT_FALSE(in.image_consent);
  EXPECT_FALSE(in.dashboard_opt_out);
}

TEST(CaseInput, ValidationNamesEveryOffendingField) {
  EXPECT_EQ(fields_of({{"prediction", "Monkeypox"}, {"confidence", 0.5}, {"location", {{"lat", 100}, {"lon", 0}}}}),
            std::vector<std::string>{"location"});
  EXPECT_EQ(fields_of(json::object()), (std::vector<std::string>{"prediction", "confidence"}));
  EXPECT_EQ(fields_of({{"prediction", "Flu"},
                       {"confidence", 1.5},
                       {"symptoms", {"fever", "sneezing"}},
                       {"age", -1},
                       {"gender", "robot"},
                       {"image_consent", "yes"},
                       {"image", "@@@"}}),
            (std::vector<std::string>{"prediction", "confidence", "symptoms", "age", "gender", "image_consent",
                                      "image"}));
  EXPECT_EQ(fields_of({{"prediction", "Other"}, {"confidence", 0.1}, {"age", 30.5}}), std::vector<std::string>{"age"});
  EXPECT_EQ(fields_of(json::array()), std::vector<std::string>{"body"});
}

TEST(CaseInput, NormalisesSymptomsAndDecodesImage) {
  const auto in = parse_case_input({{"prediction", "Other"},
                                    {"confidence", 0.2},
                                    {"symptoms", {"rash", "fever", "rash"}},
                                    {"gender", "Female"},
                                    {"age", 0},
                                    {"image", "aGVsbG8="}},
                                   binary_rules());
  EXPECT_EQ(in.symptoms, (std::vector<std::string>{"fever", "rash"}));
  EXPECT_EQ(in.gender, Gender::kFemale);
  EXPECT_EQ(in.age, 0);
  ASSERT_TRUE(in.image_png);
  EXPECT_EQ(std::string(in.image_png->begin(), in.image_png->end()), "hello");
}

TEST(CaseStore, SubmitPersistsWithServerFields) {
  TempDir dir;
  CaseStore store(dir / "cases.db");
  const auto a = store.submit(input("Monkeypox"));
  const auto b = store.submit(input("Other"));
  EXPECT_TRUE(std::regex_match(a.case_id, std::regex("[0-9a-f]{32}")));
  EXPECT_NE(a.case_id, b.case_id);
  EXPECT_LE(a.submitted_at, b.submitted_at);
  EXPECT_NO_THROW(parse_utc(a.submitted_at));
  EXPECT_FALSE(a.image_ref || a.age || a.gender || a.location);

  const auto got = store.get(a.case_id);
  ASSERT_TRUE(got);
  EXPECT_EQ(*got, a);
  EXPECT_FALSE(store.get("missing"));
  EXPECT_EQ(store.count(), 2u);
}

TEST(CaseStore, SurvivesReopenAndExports) {
  TempDir dir;
  CaseRecord first;
  {
    CaseStore store(dir / "cases.db");
    auto in = input("Monkeypox");
    in.location = LatLon{21.4, 39.8};
    in.symptoms = {"fever", "rash"};
    in.gender = Gender::kMale;
    in.age = 33;
    first = store.submit(in);
  }
  CaseStore store(dir / "cases.db");
  EXPECT_EQ(store.count(), 1u);
  EXPECT_EQ(*store.get(first.case_id), first);
  const auto later = store.submit(input("Other"));
  EXPECT_GE(later.submitted_at, first.submitted_at);

  EXPECT_EQ(store.export_json(dir / "export"), 2u);
  const auto doc = load_json_file(dir / "export" / (first.case_id + ".json"));
  EXPECT_EQ(CaseRecord::from_json(doc), first);
}

TEST(CaseStore, ImagesStoredOnlyWithConsent) {
  TempDir dir;
  StoreOptions options;
  options.image_dir = dir / "images";
  CaseStore store(dir / "cases.db", options);
  auto in = input("Monkeypox");
  in.image_png = Bytes{1, 2, 3};
  const auto without = store.submit(in);
  EXPECT_FALSE(without.image_ref);
  in.image_consent = true;
  const auto with = store.submit(in);
  ASSERT_TRUE(with.image_ref);
  EXPECT_EQ(fs::path(*with.image_ref), dir / "images" / (with.case_id + ".png"));
  EXPECT_EQ(read_file_bytes(*with.image_ref), (Bytes{1, 2, 3}));
  EXPECT_EQ(std::distance(fs::directory_iterator(dir / "images"), fs::directory_iterator{}), 1);
}

TEST(CaseStore, FiltersAndPagination) {
  TempDir dir;
  CaseStore store(dir / "cases.db");
  std::vector<CaseRecord> all;
  for (int i = 0; i < 10; ++i) {
    auto in = input(i % 3 == 0 ? "Monkeypox" : "Other");
    if (i % 2 == 0) in.location = LatLon{10.0 + i, 20.0 + i};
    in.dashboard_opt_out = i == 9;
    all.push_back(store.submit(in));
  }
  const auto page = store.list({}, 4, 2);
  EXPECT_EQ(page.total, 9u);
  ASSERT_EQ(page.items.size(), 4u);
  EXPECT_EQ(page.items[0].case_id, all[2].case_id);
  EXPECT_EQ(page.items[3].case_id, all[5].case_id);

  CaseFilter infected;
  infected.infected = true;
  EXPECT_EQ(store.scan(infected).size(), 3u);  // 0, 3, 6 (9 opted out)
  infected.include_opted_out = true;
  EXPECT_EQ(store.scan(infected).size(), 4u);

  CaseFilter region;
  region.region = BoundingBox{11.0, 0.0, 17.0, 180.0};
  const auto in_box = store.scan(region);
  ASSERT_EQ(in_box.size(), 3u);  // lat 12, 14, 16
  EXPECT_EQ(in_box[0].case_id, all[2].case_id);

  CaseFilter window;
  window.from = all[0].submitted_at;
  window.to = all[0].submitted_at;
  for (const auto& r : store.scan(window)) EXPECT_EQ(r.submitted_at, all[0].submitted_at);
  window.from = "2100-01-01T00:00:00.000Z";
  window.to.reset();
  EXPECT_TRUE(store.scan(window).empty());
}

TEST(CaseStore, ConcurrentSubmitsPersistEveryRecord) {
  TempDir dir;
  CaseStore store(dir / "cases.db");
  constexpr int kThreads = 100;
  std::vector<std::string> ids(kThreads);
  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&, t] { ids[t] = store.submit(input(t % 2 ? "Monkeypox" : "Other")).case_id; });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(store.count(), 100u);
  EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), 100u);
  CaseFilter all;
  const auto records = store.scan(all);
  for (std::size_t i = 1; i < records.size(); ++i) EXPECT_LE(records[i - 1].submitted_at, records[i].submitted_at);
}

TEST(CaseStore, RejectsMemoryPath) {
  EXPECT_THROW(CaseStore(":memory:"), Error);
}

// Independent full-scan recount used as the dashboard oracle.
struct Recount {
  std::size_t total = 0, infected = 0;
  std::map<std::string, std::size_t> gender, age, symptom;
};

Recount recount(const std::vector<CaseRecord>& records) {
  Recount r;
  for (const auto& c : records) {
    if (c.dashboard_opt_out) continue;
    ++r.total;
    if (c.prediction != "Monkeypox") continue;
    ++r.infected;
    r.gender[c.gender ? std::string(to_string(*c.gender)) : "unspecified"]++;
    std::string bucket = "unknown";
    if (c.age) {
      const int a = *c.age;
      bucket = a <= 12 ? "0-12" : a <= 17 ? "13-17" : a <= 39 ? "18-39" : a <= 64 ? "40-64" : "65+";
    }
    r.age[bucket]++;
    for (const auto& s : c.symptoms) r.symptom[s]++;
  }
  return r;
}

void expect_matches_oracle(const DashboardSnapshot& s, const std::vector<CaseRecord>& records) {
  const auto o = recount(records);
  EXPECT_EQ(s.total_cases, o.total);
  EXPECT_EQ(s.infected_count, o.infected);
  EXPECT_EQ(s.uninfected_count, o.total - o.infected);
  EXPECT_EQ(s.infection_rate, o.total ? double(o.infected) / double(o.total) : 0.0);
  const auto share = [&](std::size_t n) { return o.infected ? double(n) / double(o.infected) : 0.0; };
  ASSERT_EQ(s.gender_breakdown.size(), 4u);
  for (const auto& [g, v] : s.gender_breakdown) {
    EXPECT_EQ(v, share(o.gender.count(g) ? o.gender.at(g) : 0)) << g;
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  ASSERT_EQ(s.age_histogram.size(), 6u);
  for (const auto& [b, n] : s.age_histogram) EXPECT_EQ(n, o.age.count(b) ? o.age.at(b) : 0u) << b;
  ASSERT_EQ(s.symptom_prevalence.size(), default_symptom_catalog().size());
  for (const auto& [k, v] : s.symptom_prevalence) EXPECT_EQ(v, share(o.symptom.count(k) ? o.symptom.at(k) : 0)) << k;
  std::size_t located = 0;
  for (const auto& c : records) located += !c.dashboard_opt_out && c.location;
  EXPECT_EQ(s.geo_points.size(), located);
}

CaseInput random_input(Rng& rng) {
  CaseInput in;
  in.prediction = rng.bernoulli(0.5) ? "Monkeypox" : "Other";
  in.confidence = rng.uniform01();
  for (const auto& s : default_symptom_catalog()) {
    if (rng.bernoulli(0.4)) in.symptoms.push_back(s);
  }
  std::sort(in.symptoms.begin(), in.symptoms.end());
  if (rng.bernoulli(0.8)) in.age = static_cast<int>(rng.uniform_int(0, 100));
  if (rng.bernoulli(0.8)) in.gender = static_cast<Gender>(rng.uniform_index(3));
  if (rng.bernoulli(0.7)) in.location = LatLon{rng.uniform(-90, 90), rng.uniform(-180, 180)};
  in.dashboard_opt_out = rng.bernoulli(0.1);
  return in;
}

TEST(Dashboard, EmptyStoreIsAllZero) {
  TempDir dir;
  CaseStore store(dir / "cases.db");
  const auto s = dashboard_summary(store, {}, {});
  EXPECT_EQ(s.total_cases, 0u);
  EXPECT_EQ(s.infected_count, 0u);
  EXPECT_EQ(s.infection_rate, 0.0);
  for (const auto& [g, v] : s.gender_breakdown) EXPECT_EQ(v, 0.0);
  for (const auto& [b, n] : s.age_histogram) EXPECT_EQ(n, 0u);
  for (const auto& [k, v] : s.symptom_prevalence) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(s.geo_points.empty());
  EXPECT_FALSE(s.generated_at.empty());
}

TEST(Dashboard, FigureScenariosFourOfSevenAndThreeOfFourMale) {
  TempDir dir;
  CaseStore store(dir / "cases.db");
  const Gender genders[] = {Gender::kMale, Gender::kMale, Gender::kFemale, Gender::kMale};
  for (auto g : genders) {
    auto in = input("Monkeypox");
    in.gender = g;
    store.submit(in);
  }
  for (int i = 0; i < 3; ++i) {
    auto in = input("Other");
    in.gender = Gender::kFemale;
    store.submit(in);
  }
  const auto s = dashboard_summary(store, {}, {});
  EXPECT_EQ(s.total_cases, 7u);
  EXPECT_EQ(s.infected_count, 4u);
  EXPECT_DOUBLE_EQ(s.infection_rate, 4.0 / 7.0);
  EXPECT_EQ(static_cast<int>(std::lround(s.infection_rate * 100)), 57);
  EXPECT_EQ(s.gender_breakdown[0], (std::pair<std::string, double>{"male", 0.75}));
  EXPECT_EQ(s.gender_breakdown[1], (std::pair<std::string, double>{"female", 0.25}));
  expect_matches_oracle(s, store.scan({.include_opted_out = true}));
}

TEST(Dashboard, MatchesFullScanOracleOnRandomStores) {
  TempDir dir;
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    CaseStore store(dir / ("s" + std::to_string(trial) + ".db"));
    const int n = static_cast<int>(rng.uniform_int(0, 60));
    for (int i = 0; i < n; ++i) store.submit(random_input(rng));
    CaseFilter all;
    all.include_opted_out = true;
    const auto records = store.scan(all);
    const auto s = dashboard_summary(store, {}, {});
    expect_matches_oracle(s, records);

    // Region filter agrees with filtering the records first.
    CaseFilter north;
    north.region = BoundingBox{0, -180, 90, 180};
    std::vector<CaseRecord> northern;
    for (const auto& r : records) {
      if (r.location && r.location->lat >= 0) northern.push_back(r);
    }
    expect_matches_oracle(dashboard_summary(store, north, {}), northern);
  }
}

TEST(Dashboard, ReadsAreIdempotentAndSubmitsMonotone) {
  TempDir dir;
  CaseStore store(dir / "cases.db");
  Rng rng(4);
  for (int i = 0; i < 20; ++i) store.submit(random_input(rng));
  const auto a = dashboard_summary(store, {}, {});
  const auto b = dashboard_summary(store, {}, {});
  EXPECT_TRUE(a.same_figures(b));

  auto prev = b;
  for (int i = 0; i < 10; ++i) {
    auto in = random_input(rng);
    in.dashboard_opt_out = false;
    const bool infected = in.prediction == "Monkeypox";
    store.submit(in);
    const auto next = dashboard_summary(store, {}, {});
    EXPECT_EQ(next.total_cases, prev.total_cases + 1);
    EXPECT_EQ(next.infected_count, prev.infected_count + (infected ? 1 : 0));
    prev = next;
  }
}

TEST(Dashboard, AgeBucketValidation) {
  EXPECT_NO_THROW(validate_age_buckets(default_age_buckets()));
  EXPECT_THROW(validate_age_buckets({{"a", 1, 10}, {"b", 11, std::nullopt}}), Error);
  EXPECT_THROW(validate_age_buckets({{"a", 0, 10}, {"b", 12, std::nullopt}}), Error);
  EXPECT_THROW(validate_age_buckets({{"a", 0, 10}, {"b", 11, 20}}), Error);
  EXPECT_THROW(validate_age_buckets({{"unknown", 0, std::nullopt}}), Error);
  const auto round = age_buckets_from_json(age_buckets_to_json(default_age_buckets()));
  ASSERT_EQ(round.size(), 5u);
  EXPECT_EQ(round[4].label, "65+");
  EXPECT_FALSE(round[4].max_age);
}

TEST(ServiceConfig, FileThenEnvironment) {
  TempDir dir;
  save_json_file(dir / "service.json", {{"bundle_path", "b"}, {"api_token", "file"}, {"port", 9000}, {"threshold", 0.6}});
  std::map<std::string, std::string> env{{"ITMAINN_API_TOKEN", "env-token"}, {"ITMAINN_PORT", "9100"},
                                         {"ITMAINN_STORE_PATH", "/data/cases.db"}, {"ITMAINN_BUNDLE_PATH", "/bundles/x"}};
  auto lookup = [&](const std::string& k) -> std::optional<std::string> {
    return env.count(k) ? std::optional(env.at(k)) : std::nullopt;
  };
  const auto c = load_service_config(dir / "service.json", lookup);
  EXPECT_EQ(c.api_token, "env-token");
  EXPECT_EQ(c.port, 9100);
  EXPECT_EQ(c.store_path, "/data/cases.db");
  EXPECT_EQ(c.bundle_path, "/bundles/x");
  EXPECT_DOUBLE_EQ(c.threshold, 0.6);
  EXPECT_EQ(c.symptom_catalog, default_symptom_catalog());

  env["ITMAINN_PORT"] = "80a";
  EXPECT_THROW(load_service_config(dir / "service.json", lookup), Error);
  env.erase("ITMAINN_PORT");
  env.erase("ITMAINN_API_TOKEN");
  save_json_file(dir / "service.json", {{"bundle_path", "b"}});
  EXPECT_THROW(load_service_config(dir / "service.json", lookup), Error);  // token required
  save_json_file(dir / "service.json", {{"bundle_path", "b"}, {"api_token", "t"}, {"colour", "red"}});
  EXPECT_THROW(load_service_config(dir / "service.json", lookup), Error);
  const auto back = ServiceConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
}

TEST(Decide, BinaryThresholdIsInclusive) {
  const auto at = decide({0.5, 0.5}, kBinaryClasses, model::Task::kBinary, 0.5);
  EXPECT_EQ(at.prediction, "Monkeypox");
  EXPECT_EQ(at.confidence, 0.5);
  const auto below = decide({1.0 - 0.4999, 0.4999}, kBinaryClasses, model::Task::kBinary, 0.5);
  EXPECT_EQ(below.prediction, "Other");
  EXPECT_DOUBLE_EQ(below.confidence, 0.5001);
  EXPECT_EQ(decide({0.3, 0.7}, kBinaryClasses, model::Task::kBinary, 0.8).prediction, "Other");
  EXPECT_EQ(decide({0.3, 0.7}, kBinaryClasses, model::Task::kBinary, 0.7).prediction, "Monkeypox");
}

TEST(Decide, MulticlassArgmax) {
  const std::vector<std::string> names{"a", "b", "c"};
  const auto c = decide({0.2, 0.5, 0.3}, names, model::Task::kMulticlass, 0.5);
  EXPECT_EQ(c.prediction, "b");
  EXPECT_EQ(c.confidence, 0.5);
  EXPECT_EQ(decide({0.4, 0.4, 0.2}, names, model::Task::kMulticlass, 0.5).prediction, "a");
  EXPECT_THROW(decide({0.5, 0.5}, names, model::Task::kMulticlass, 0.5), Error);
}

}  // namespace
