#include <set>
#include <thread>

#include <gtest/gtest.h>
#include <opencv2/core.hpp>

#include "itmainn/augment/image.hpp"
#include "service_fixture.hpp"

namespace {

using namespace itmainn;
using itmainn::testing::RunningService;
using nlohmann::json;
namespace fs = std::filesystem;

std::string png_bytes(int label = 1, int size = 48) {
  const auto bytes = augment::encode_png(itmainn::testing::make_shape_image(label, size, 3));
  return {bytes.begin(), bytes.end()};
}

httplib::Result classify(httplib::Client& c, const std::string& path, const std::string& bytes,
                         const std::string& symptoms = "") {
  httplib::MultipartFormDataItems items{{"image", bytes, "lesion.png", "image/png"}};
  if (!symptoms.empty()) items.push_back({"symptoms", symptoms, "", "application/json"});
  return c.Post(path, items);
}

json body_of(const httplib::Result& r) { return json::parse(r->body); }

std::string base64(const std::string& raw) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  std::size_t i = 0;
  for (; i + 2 < raw.size(); i += 3) {
    const unsigned v = (unsigned char)raw[i] << 16 | (unsigned char)raw[i + 1] << 8 | (unsigned char)raw[i + 2];
    for (int s = 18; s >= 0; s -= 6) out += kAlphabet[(v >> s) & 63];
  }
  if (i + 1 == raw.size()) {
    const unsigned v = (unsigned char)raw[i] << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == raw.size()) {
    const unsigned v = (unsigned char)raw[i] << 16 | (unsigned char)raw[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += "=";
  }
  return out;
}

class Server : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { svc_ = new RunningService(); }
  static void TearDownTestSuite() {
    delete svc_;
    svc_ = nullptr;
  }
  static RunningService* svc_;
};
RunningService* Server::svc_ = nullptr;

TEST_F(Server, HealthzAndConfig) {
  auto c = svc_->client();
  auto r = c.Get("/api/v1/healthz");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(body_of(r)["status"], "ok");
  EXPECT_EQ(body_of(r)["model_version"], svc_->service().parts().binary->version);

  r = c.Get("/api/v1/config");
  ASSERT_TRUE(r);
  const auto cfg = body_of(r);
  EXPECT_EQ(cfg["symptom_catalog"].size(), 7u);
  EXPECT_EQ(cfg["threshold"], 0.5);
  EXPECT_EQ(cfg["models"]["binary"]["class_names"], json({"Other", "Monkeypox"}));
  EXPECT_EQ(cfg["models"]["multiclass"]["class_names"].size(), 6u);
  EXPECT_FALSE(cfg.contains("api_token"));
}

TEST_F(Server, ClassifyReturnsNormalisedScores) {
  auto c = svc_->client();
  auto r = classify(c, "/api/v1/classify", png_bytes(), R"(["fever","rash"])");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200) << r->body;
  const auto b = body_of(r);
  double sum = 0.0;
  for (const auto& [name, p] : b["per_class"].items()) sum += p.get<double>();
  EXPECT_NEAR(sum, 1.0, 1e-6);
  const double p = b["per_class"]["Monkeypox"];
  EXPECT_EQ(b["prediction"], p >= 0.5 ? "Monkeypox" : "Other");
  EXPECT_DOUBLE_EQ(b["confidence"].get<double>(), p >= 0.5 ? p : 1.0 - p);
  EXPECT_EQ(b["symptoms"], json({"fever", "rash"}));
  EXPECT_EQ(b["model_version"], svc_->service().parts().binary->version);
  EXPECT_EQ(b["infected"], b["prediction"] == "Monkeypox");

  r = classify(c, "/api/v1/classify/multiclass", png_bytes(0));
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200);
  const auto m = body_of(r);
  ASSERT_EQ(m["per_class"].size(), 6u);
  sum = 0.0;
  double best = 0.0;
  for (const auto& [name, q] : m["per_class"].items()) {
    sum += q.get<double>();
    best = std::max(best, q.get<double>());
  }
  EXPECT_NEAR(sum, 1.0, 1e-6);
  EXPECT_EQ(m["confidence"].get<double>(), best);
}

TEST_F(Server, ClassifyAgreesWithDirectBundlePrediction) {
  auto c = svc_->client();
  const auto bytes = png_bytes(1, 40);
  const auto& d = *svc_->service().parts().binary;
  const auto direct = service::classify_image(d, {reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()}, 0.5);
  auto r = classify(c, "/api/v1/classify", bytes);
  ASSERT_TRUE(r);
  EXPECT_NEAR(body_of(r)["per_class"]["Monkeypox"].get<double>(), direct.per_class[1].second, 1e-12);
}

TEST_F(Server, ClassifyRejectsTextAndBadSymptoms) {
  auto c = svc_->client();
  auto r = classify(c, "/api/v1/classify", "just some text, not an image");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 415);
  EXPECT_EQ(body_of(r)["error"], "DecodeError");

  r = classify(c, "/api/v1/classify", png_bytes(), R"(["sneezing"])");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 422);
  EXPECT_EQ(body_of(r)["fields"], json({"symptoms"}));

  httplib::MultipartFormDataItems none{{"note", "x", "", "text/plain"}};
  r = c.Post("/api/v1/classify", none);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 422);
  EXPECT_EQ(body_of(r)["fields"], json({"image"}));
}

TEST_F(Server, SubmitCaseContract) {
  auto c = svc_->client();
  auto r = c.Post("/api/v1/cases", json{{"prediction", "Other"}, {"confidence", 0.8}}.dump(), "application/json");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 201) << r->body;
  const auto rec = body_of(r);
  EXPECT_EQ(rec["case_id"].get<std::string>().size(), 32u);
  EXPECT_TRUE(rec["age"].is_null());
  EXPECT_TRUE(rec["gender"].is_null());
  EXPECT_TRUE(rec["location"].is_null());
  EXPECT_TRUE(rec["image_ref"].is_null());
  EXPECT_EQ(rec["model_version"], svc_->service().parts().binary->version);

  r = c.Post("/api/v1/cases",
             json{{"prediction", "Monkeypox"}, {"confidence", 0.9}, {"location", {{"lat", 100}, {"lon", 0}}}}.dump(),
             "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 422);
  EXPECT_EQ(body_of(r)["fields"], json({"location"}));

  // Multiclass names are accepted as predictions too.
  r = c.Post("/api/v1/cases", json{{"prediction", "Measles"}, {"confidence", 0.4}}.dump(), "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 201);

  r = c.Post("/api/v1/cases", "{not json", "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 422);
}

TEST_F(Server, ConsentedImagesAreReencodedAndStored) {
  auto c = svc_->client();
  const auto img = base64(png_bytes());
  auto r = c.Post("/api/v1/cases",
                  json{{"prediction", "Monkeypox"}, {"confidence", 0.9}, {"image", img}, {"image_consent", true}}.dump(),
                  "application/json");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 201) << r->body;
  const auto ref = body_of(r)["image_ref"];
  ASSERT_TRUE(ref.is_string());
  EXPECT_TRUE(fs::exists(ref.get<std::string>()));
  EXPECT_NO_THROW(augment::load_image(ref.get<std::string>()));

  r = c.Post("/api/v1/cases", json{{"prediction", "Monkeypox"}, {"confidence", 0.9}, {"image", img}}.dump(),
             "application/json");
  ASSERT_TRUE(r);
  EXPECT_TRUE(body_of(r)["image_ref"].is_null());

  r = c.Post("/api/v1/cases",
             json{{"prediction", "Other"}, {"confidence", 0.9}, {"image", base64("text")}, {"image_consent", true}}.dump(),
             "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 422);
  EXPECT_EQ(body_of(r)["fields"], json({"image"}));
}

TEST_F(Server, ProtectedRoutesNeedTheToken) {
  auto c = svc_->client();
  for (const char* path : {"/api/v1/cases", "/api/v1/dashboard/summary"}) {
    auto r = c.Get(path);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 401) << path;
    r = c.Get(path, httplib::Headers{{"Authorization", "Bearer wrong-token"}});
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 401) << path;
    r = c.Get(path, httplib::Headers{{"Authorization", "test-token"}});
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 401) << path;
    r = c.Get(path, svc_->auth());
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200) << path;
  }
}

TEST_F(Server, CaseListingPagesAndFilters) {
  auto c = svc_->client();
  std::string first_id;
  for (int i = 0; i < 5; ++i) {
    auto r = c.Post("/api/v1/cases", json{{"prediction", "Monkeypox"}, {"confidence", 0.7}}.dump(), "application/json");
    if (i == 0) first_id = body_of(r)["case_id"];
  }
  auto r = c.Get("/api/v1/cases?limit=2&offset=1&infected=true", svc_->auth());
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200);
  auto page = body_of(r);
  EXPECT_EQ(page["items"].size(), 2u);
  EXPECT_GE(page["total"].get<int>(), 5);
  for (const auto& item : page["items"]) EXPECT_EQ(item["prediction"], "Monkeypox");

  r = c.Get("/api/v1/cases?from=2100-01-01", svc_->auth());
  EXPECT_EQ(body_of(r)["total"], 0);
  r = c.Get("/api/v1/cases?from=yesterday", svc_->auth());
  EXPECT_EQ(r->status, 422);
  EXPECT_EQ(body_of(r)["fields"], json({"from"}));
  r = c.Get("/api/v1/cases?limit=0", svc_->auth());
  EXPECT_EQ(r->status, 422);

  r = c.Get("/api/v1/cases/" + first_id, svc_->auth());
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(body_of(r)["case_id"], first_id);
  r = c.Get("/api/v1/cases/ffff", svc_->auth());
  EXPECT_EQ(r->status, 404);
}

TEST_F(Server, HealthCentersSortedByDistance) {
  auto c = svc_->client();
  auto r = c.Get("/api/v1/health-centers?lat=21.2854&lon=40.4248&limit=2");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200);
  const auto list = body_of(r);
  ASSERT_EQ(list.size(), 2u);
  EXPECT_EQ(list[0]["center"]["center_id"], "taif-1");
  EXPECT_EQ(list[0]["distance_km"], 0.0);
  EXPECT_EQ(list[1]["center"]["center_id"], "mecca-1");
  EXPECT_NEAR(list[1]["distance_km"].get<double>(), 59.84, 0.5);

  r = c.Get("/api/v1/health-centers?lat=21.3");
  EXPECT_EQ(r->status, 422);
  EXPECT_EQ(body_of(r)["fields"], json({"lon"}));
  r = c.Get("/api/v1/health-centers?lat=95&lon=0");
  EXPECT_EQ(r->status, 422);
  r = c.Get("/api/v1/health-centers?lat=0&lon=0");
  EXPECT_EQ(body_of(r).size(), 3u);
}

TEST_F(Server, StaticAppIsServed) {
  auto c = svc_->client();
  auto r = c.Get("/app/index.html");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_NE(r->body.find("itmainn"), std::string::npos);
}

TEST(ServerScenario, DashboardFiguresAndConcurrentSubmits) {
  RunningService svc;
  auto c = svc.client();
  auto submit = [&](const std::string& prediction, const std::string& gender) {
    return c.Post("/api/v1/cases", json{{"prediction", prediction}, {"confidence", 0.9}, {"gender", gender}}.dump(),
                  "application/json");
  };
  for (const char* g : {"male", "male", "female", "male"}) ASSERT_EQ(submit("Monkeypox", g)->status, 201);
  for (int i = 0; i < 3; ++i) ASSERT_EQ(submit("Other", "female")->status, 201);
  auto r = c.Get("/api/v1/dashboard/summary", svc.auth());
  ASSERT_TRUE(r);
  auto s = body_of(r);
  EXPECT_EQ(s["total_cases"], 7);
  EXPECT_EQ(s["infected_count"], 4);
  EXPECT_DOUBLE_EQ(s["infection_rate"].get<double>(), 4.0 / 7.0);
  EXPECT_DOUBLE_EQ(s["gender_breakdown"]["male"].get<double>(), 0.75);

  r = c.Get("/api/v1/dashboard/summary?to=2000-01-01", svc.auth());
  EXPECT_EQ(body_of(r)["total_cases"], 0);
  EXPECT_EQ(body_of(r)["infection_rate"], 0.0);

  constexpr int kClients = 100;
  std::vector<std::string> ids(kClients);
  std::vector<int> status(kClients, 0);
  std::vector<std::thread> threads;
  for (int t = 0; t < kClients; ++t) {
    threads.emplace_back([&, t] {
      auto client = svc.client();
      auto res = client.Post("/api/v1/cases", json{{"prediction", "Other"}, {"confidence", 0.1}}.dump(),
                             "application/json");
      if (!res) {
        status[t] = -static_cast<int>(res.error());
        return;
      }
      status[t] = res->status;
      if (res->status == 201) ids[t] = json::parse(res->body)["case_id"];
    });
  }
  for (auto& th : threads) th.join();
  for (int t = 0; t < kClients; ++t) EXPECT_EQ(status[t], 201) << t;
  EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), 100u);
  EXPECT_EQ(svc.service().parts().store->count(), 107u);
}

TEST(ServerLimits, OversizeUploadIs413) {
  RunningService svc(2000);
  auto c = svc.client();
  cv::Mat noise(32, 32, CV_8UC3);
  cv::randu(noise, 0, 256);
  const auto encoded = augment::encode_png(noise);
  const std::string big(encoded.begin(), encoded.end());
  ASSERT_GT(big.size(), 2000u);
  auto r = classify(c, "/api/v1/classify", big);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 413);
  EXPECT_EQ(body_of(r)["error"], "OversizeImage");

  // Far past the limit the transport rejects the body before parsing.
  r = classify(c, "/api/v1/classify", std::string(200000, 'x'));
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 413);
}

TEST(ServerLifecycle, StopFromAnotherThreadReleasesWait) {
  RunningService svc;
  std::thread stopper([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    svc.service().stop();
  });
  svc.service().wait();
  stopper.join();
  svc.service().wait();
  EXPECT_FALSE(svc.client().Get("/api/v1/healthz"));
}

}  // namespace
