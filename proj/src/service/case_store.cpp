#include "itmainn/service/case_store.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <set>

#include <openssl/evp.h>
#include <openssl/rand.h>
#include <sqlite3.h>

#include "itmainn/core/log.hpp"

namespace itmainn::service {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS cases (
  seq INTEGER PRIMARY KEY AUTOINCREMENT,
  case_id TEXT NOT NULL UNIQUE,
  submitted_at TEXT NOT NULL,
  image_ref TEXT,
  symptoms TEXT NOT NULL,
  age INTEGER,
  gender TEXT,
  lat REAL,
  lon REAL,
  prediction TEXT NOT NULL,
  confidence REAL NOT NULL,
  model_version TEXT NOT NULL,
  image_consent INTEGER NOT NULL,
  dashboard_opt_out INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS cases_submitted_at ON cases(submitted_at);
)sql";

constexpr const char* kColumns =
    "case_id, submitted_at, image_ref, symptoms, age, gender, lat, lon, prediction, confidence, "
    "model_version, image_consent, dashboard_opt_out";

[[noreturn]] void storage_fail(sqlite3* db, const std::string& what) {
  fail(ErrorKind::kStorageFailure, what + ": " + (db ? sqlite3_errmsg(db) : "no connection"));
}

void exec(sqlite3* db, const char* sql) {
  char* err = nullptr;
  if (sqlite3_exec(db, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    const std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    fail(ErrorKind::kStorageFailure, std::string(sql).substr(0, 40) + ": " + msg);
  }
}

class Statement {
 public:
  Statement(sqlite3* db, const std::string& sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt_, nullptr) != SQLITE_OK) storage_fail(db, "prepare");
  }
  ~Statement() { sqlite3_finalize(stmt_); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  void bind(int i, const std::string& v) { check(sqlite3_bind_text(stmt_, i, v.c_str(), -1, SQLITE_TRANSIENT)); }
  void bind(int i, double v) { check(sqlite3_bind_double(stmt_, i, v)); }
  void bind(int i, std::int64_t v) { check(sqlite3_bind_int64(stmt_, i, v)); }
  void bind_null(int i) { check(sqlite3_bind_null(stmt_, i)); }

  // True while a row is available.
  bool step() {
    const int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    storage_fail(db_, "step");
  }

  bool is_null(int col) const { return sqlite3_column_type(stmt_, col) == SQLITE_NULL; }
  std::string text(int col) const {
    const auto* p = sqlite3_column_text(stmt_, col);
    return p ? reinterpret_cast<const char*>(p) : "";
  }
  double real(int col) const { return sqlite3_column_double(stmt_, col); }
  std::int64_t integer(int col) const { return sqlite3_column_int64(stmt_, col); }

 private:
  void check(int rc) {
    if (rc != SQLITE_OK) storage_fail(db_, "bind");
  }
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

sqlite3* open_connection(const std::filesystem::path& path, bool create) {
  sqlite3* db = nullptr;
  const int flags = SQLITE_OPEN_READWRITE | SQLITE_OPEN_NOMUTEX | (create ? SQLITE_OPEN_CREATE : 0);
  if (sqlite3_open_v2(path.c_str(), &db, flags, nullptr) != SQLITE_OK) {
    const std::string msg = db ? sqlite3_errmsg(db) : "out of memory";
    sqlite3_close(db);
    fail(ErrorKind::kStorageFailure, "cannot open " + path.string() + ": " + msg);
  }
  sqlite3_busy_timeout(db, 10000);
  return db;
}

CaseRecord read_record(const Statement& s) {
  CaseRecord r;
  r.case_id = s.text(0);
  r.submitted_at = s.text(1);
  if (!s.is_null(2)) r.image_ref = s.text(2);
  r.symptoms = json::parse(s.text(3)).get<std::vector<std::string>>();
  if (!s.is_null(4)) r.age = static_cast<int>(s.integer(4));
  if (!s.is_null(5)) r.gender = parse_gender(s.text(5));
  if (!s.is_null(6) && !s.is_null(7)) r.location = LatLon{s.real(6), s.real(7)};
  r.prediction = s.text(8);
  r.confidence = s.real(9);
  r.model_version = s.text(10);
  r.image_consent = s.integer(11) != 0;
  r.dashboard_opt_out = s.integer(12) != 0;
  return r;
}

struct Where {
  std::string sql;
  std::vector<json> args;  // strings or numbers
};

Where build_where(const CaseFilter& f, const std::string& positive_class) {
  Where w;
  std::vector<std::string> terms;
  if (!f.include_opted_out) terms.push_back("dashboard_opt_out = 0");
  if (f.from) {
    terms.push_back("submitted_at >= ?");
    w.args.push_back(*f.from);
  }
  if (f.to) {
    terms.push_back("submitted_at <= ?");
    w.args.push_back(*f.to);
  }
  if (f.region) {
    terms.push_back("lat IS NOT NULL AND lat BETWEEN ? AND ? AND lon BETWEEN ? AND ?");
    w.args.insert(w.args.end(), {f.region->min_lat, f.region->max_lat, f.region->min_lon, f.region->max_lon});
  }
  if (f.infected) {
    terms.push_back(*f.infected ? "prediction = ?" : "prediction <> ?");
    w.args.push_back(positive_class);
  }
  for (std::size_t i = 0; i < terms.size(); ++i) w.sql += (i == 0 ? " WHERE " : " AND ") + terms[i];
  return w;
}

void bind_args(Statement& s, const std::vector<json>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    const int idx = static_cast<int>(i) + 1;
    if (args[i].is_string()) {
      s.bind(idx, args[i].get<std::string>());
    } else {
      s.bind(idx, args[i].get<double>());
    }
  }
}

std::optional<Bytes> decode_base64(const std::string& text) {
  std::string clean;
  clean.reserve(text.size());
  for (char c : text) {
    if (c != '\n' && c != '\r' && c != ' ') clean += c;
  }
  if (clean.empty() || clean.size() % 4 != 0) return std::nullopt;
  Bytes out(clean.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                static_cast<int>(clean.size()));
  if (n < 0) return std::nullopt;
  std::size_t pad = 0;
  if (clean.ends_with("==")) {
    pad = 2;
  } else if (clean.ends_with("=")) {
    pad = 1;
  }
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

}  // namespace

const std::vector<std::string>& default_symptom_catalog() {
  static const std::vector<std::string> catalog{"fever",        "rash",   "headache", "swollen_lymph_nodes",
                                                "muscle_aches", "chills", "fatigue"};
  return catalog;
}

std::string_view to_string(Gender gender) {
  switch (gender) {
    case Gender::kMale: return "male";
    case Gender::kFemale: return "female";
    case Gender::kOther: return "other";
  }
  return "other";
}

std::optional<Gender> parse_gender(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "male") return Gender::kMale;
  if (lower == "female") return Gender::kFemale;
  if (lower == "other") return Gender::kOther;
  return std::nullopt;
}

CaseInput parse_case_input(const json& body, const CaseRules& rules) {
  if (!body.is_object()) throw ValidationError({"body"}, "case must be a JSON object");
  CaseInput in;
  std::vector<std::string> bad;
  std::vector<std::string> reasons;
  auto reject = [&](const std::string& field, const std::string& why) {
    bad.push_back(field);
    reasons.push_back(field + ": " + why);
  };
  auto present = [&](const char* key) { return body.contains(key) && !body.at(key).is_null(); };

  if (!present("prediction") || !body.at("prediction").is_string()) {
    reject("prediction", "required string");
  } else {
    in.prediction = body.at("prediction").get<std::string>();
    const auto& names = rules.class_names;
    if (!names.empty() && std::find(names.begin(), names.end(), in.prediction) == names.end()) {
      reject("prediction", "not a model class");
    }
  }

  if (!present("confidence") || !body.at("confidence").is_number()) {
    reject("confidence", "required number");
  } else {
    in.confidence = body.at("confidence").get<double>();
    if (!(in.confidence >= 0.0 && in.confidence <= 1.0)) reject("confidence", "outside [0, 1]");
  }

  if (present("symptoms")) {
    const auto& s = body.at("symptoms");
    std::set<std::string> keys;
    bool ok = s.is_array();
    for (const auto& item : ok ? s : json::array()) {
      const auto& cat = rules.symptom_catalog;
      if (!item.is_string() || std::find(cat.begin(), cat.end(), item.get<std::string>()) == cat.end()) {
        ok = false;
        break;
      }
      keys.insert(item.get<std::string>());
    }
    if (ok) {
      in.symptoms.assign(keys.begin(), keys.end());
    } else {
      reject("symptoms", "must be an array of catalog keys");
    }
  }

  if (present("age")) {
    const auto& a = body.at("age");
    if (!a.is_number_integer() || a.get<std::int64_t>() < 0 || a.get<std::int64_t>() > rules.max_age) {
      reject("age", "integer in [0, " + std::to_string(rules.max_age) + "]");
    } else {
      in.age = a.get<int>();
    }
  }

  if (present("gender")) {
    const auto& g = body.at("gender");
    in.gender = g.is_string() ? parse_gender(g.get<std::string>()) : std::nullopt;
    if (!in.gender) reject("gender", "one of male, female, other");
  }

  if (present("location")) {
    const auto& l = body.at("location");
    if (!l.is_object() || !l.contains("lat") || !l.contains("lon") || !l.at("lat").is_number() ||
        !l.at("lon").is_number()) {
      reject("location", "object with numeric lat and lon");
    } else {
      const LatLon p{l.at("lat").get<double>(), l.at("lon").get<double>()};
      try {
        check_coordinates(p);
        in.location = p;
      } catch (const Error& e) {
        reject("location", e.detail());
      }
    }
  }

  if (present("model_version")) {
    if (body.at("model_version").is_string()) {
      in.model_version = body.at("model_version").get<std::string>();
    } else {
      reject("model_version", "string");
    }
  }

  for (const char* flag : {"image_consent", "dashboard_opt_out"}) {
    if (!present(flag)) continue;
    if (!body.at(flag).is_boolean()) {
      reject(flag, "boolean");
    } else {
      (std::string(flag) == "image_consent" ? in.image_consent : in.dashboard_opt_out) = body.at(flag).get<bool>();
    }
  }

  if (present("image")) {
    const auto& img = body.at("image");
    auto bytes = img.is_string() ? decode_base64(img.get<std::string>()) : std::nullopt;
    if (!bytes || bytes->empty()) {
      reject("image", "base64 string");
    } else {
      in.image_png = std::move(bytes);
    }
  }

  if (!bad.empty()) {
    std::string msg;
    for (const auto& r : reasons) msg += (msg.empty() ? "" : "; ") + r;
    throw ValidationError(bad, msg);
  }
  return in;
}

json CaseRecord::to_json() const {
  json j{{"case_id", case_id},
         {"submitted_at", submitted_at},
         {"image_ref", image_ref ? json(*image_ref) : json(nullptr)},
         {"symptoms", symptoms},
         {"age", age ? json(*age) : json(nullptr)},
         {"gender", gender ? json(std::string(to_string(*gender))) : json(nullptr)},
         {"location", location ? json{{"lat", location->lat}, {"lon", location->lon}} : json(nullptr)},
         {"prediction", prediction},
         {"confidence", confidence},
         {"model_version", model_version},
         {"image_consent", image_consent},
         {"dashboard_opt_out", dashboard_opt_out}};
  return j;
}

CaseRecord CaseRecord::from_json(const json& j) {
  CaseRecord r;
  r.case_id = j.at("case_id").get<std::string>();
  r.submitted_at = j.at("submitted_at").get<std::string>();
  if (!j.at("image_ref").is_null()) r.image_ref = j.at("image_ref").get<std::string>();
  r.symptoms = j.at("symptoms").get<std::vector<std::string>>();
  if (!j.at("age").is_null()) r.age = j.at("age").get<int>();
  if (!j.at("gender").is_null()) r.gender = parse_gender(j.at("gender").get<std::string>());
  if (!j.at("location").is_null()) {
    r.location = LatLon{j.at("location").at("lat").get<double>(), j.at("location").at("lon").get<double>()};
  }
  r.prediction = j.at("prediction").get<std::string>();
  r.confidence = j.at("confidence").get<double>();
  r.model_version = j.at("model_version").get<std::string>();
  r.image_consent = j.value("image_consent", false);
  r.dashboard_opt_out = j.value("dashboard_opt_out", false);
  return r;
}

json CasePage::to_json() const {
  json items_json = json::array();
  for (const auto& r : items) items_json.push_back(r.to_json());
  return {{"total", total}, {"offset", offset}, {"limit", limit}, {"items", items_json}};
}

std::string random_case_id() {
  unsigned char raw[16];
  if (RAND_bytes(raw, sizeof(raw)) != 1) fail(ErrorKind::kStorageFailure, "system random source unavailable");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string id;
  for (unsigned char b : raw) {
    id += kHex[b >> 4];
    id += kHex[b & 15];
  }
  return id;
}

struct CaseStore::Impl {
  std::filesystem::path path;
  int max_idle = 4;

  std::mutex write_mutex;
  sqlite3* writer = nullptr;
  std::string last_timestamp;

  std::mutex pool_mutex;
  std::vector<sqlite3*> idle;

  ~Impl() {
    for (auto* db : idle) sqlite3_close(db);
    sqlite3_close(writer);
  }

  // Borrowed read connection, returned to the pool on destruction.
  struct Reader {
    Impl* impl;
    sqlite3* db;
    Reader(Impl* i) : impl(i), db(i->acquire()) {
      try {
        exec(db, "BEGIN");
      } catch (...) {
        impl->release(db);
        throw;
      }
    }
    ~Reader() {
      sqlite3_exec(db, "COMMIT", nullptr, nullptr, nullptr);
      impl->release(db);
    }
  };

  sqlite3* acquire() {
    {
      std::lock_guard lock(pool_mutex);
      if (!idle.empty()) {
        auto* db = idle.back();
        idle.pop_back();
        return db;
      }
    }
    return open_connection(path, false);
  }

  void release(sqlite3* db) {
    std::lock_guard lock(pool_mutex);
    if (static_cast<int>(idle.size()) < max_idle) {
      idle.push_back(db);
    } else {
      sqlite3_close(db);
    }
  }
};

CaseStore::CaseStore(const std::filesystem::path& path, StoreOptions options)
    : path_(path), options_(std::move(options)), impl_(std::make_unique<Impl>()) {
  if (path.empty() || path == ":memory:") fail(ErrorKind::kInvalidArgument, "case store needs a file path");
  if (options_.image_dir.empty()) options_.image_dir = path_.string() + ".images";
  impl_->path = path_;
  impl_->max_idle = std::max(1, options_.read_connections);
  std::error_code ec;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path(), ec);
  impl_->writer = open_connection(path_, true);
  exec(impl_->writer, "PRAGMA journal_mode=WAL");
  exec(impl_->writer, "PRAGMA synchronous=NORMAL");
  {
    Statement v(impl_->writer, "PRAGMA user_version");
    v.step();
    const auto version = v.integer(0);
    if (version != 0 && version != kSchemaVersion) {
      fail(ErrorKind::kStorageFailure, path_.string() + " has schema version " + std::to_string(version));
    }
  }
  exec(impl_->writer, kSchema);
  exec(impl_->writer, ("PRAGMA user_version=" + std::to_string(kSchemaVersion)).c_str());
  Statement last(impl_->writer, "SELECT MAX(submitted_at) FROM cases");
  if (last.step() && !last.is_null(0)) impl_->last_timestamp = last.text(0);
}

CaseStore::~CaseStore() = default;

CaseRecord CaseStore::submit(const CaseInput& input) {
  CaseRecord r;
  r.case_id = random_case_id();
  r.symptoms = input.symptoms;
  r.age = input.age;
  r.gender = input.gender;
  r.location = input.location;
  r.prediction = input.prediction;
  r.confidence = input.confidence;
  r.model_version = input.model_version;
  r.image_consent = input.image_consent;
  r.dashboard_opt_out = input.dashboard_opt_out;

  std::lock_guard lock(impl_->write_mutex);
  r.submitted_at = std::max(format_utc(std::chrono::system_clock::now()), impl_->last_timestamp);

  std::optional<std::filesystem::path> image_path;
  if (input.image_consent && input.image_png) {
    std::error_code ec;
    std::filesystem::create_directories(options_.image_dir, ec);
    image_path = options_.image_dir / (r.case_id + ".png");
    try {
      write_file(*image_path, *input.image_png);
    } catch (const Error& e) {
      fail(ErrorKind::kStorageFailure, "storing image: " + e.detail());
    }
    r.image_ref = image_path->string();
  }

  sqlite3* db = impl_->writer;
  try {
    exec(db, "BEGIN IMMEDIATE");
    Statement s(db, std::string("INSERT INTO cases (") + kColumns + ") VALUES (?,?,?,?,?,?,?,?,?,?,?,?,?)");
    s.bind(1, r.case_id);
    s.bind(2, r.submitted_at);
    r.image_ref ? s.bind(3, *r.image_ref) : s.bind_null(3);
    s.bind(4, json(r.symptoms).dump());
    r.age ? s.bind(5, static_cast<std::int64_t>(*r.age)) : s.bind_null(5);
    r.gender ? s.bind(6, std::string(to_string(*r.gender))) : s.bind_null(6);
    if (r.location) {
      s.bind(7, r.location->lat);
      s.bind(8, r.location->lon);
    } else {
      s.bind_null(7);
      s.bind_null(8);
    }
    s.bind(9, r.prediction);
    s.bind(10, r.confidence);
    s.bind(11, r.model_version);
    s.bind(12, static_cast<std::int64_t>(r.image_consent));
    s.bind(13, static_cast<std::int64_t>(r.dashboard_opt_out));
    s.step();
    exec(db, "COMMIT");
  } catch (const Error&) {
    sqlite3_exec(db, "ROLLBACK", nullptr, nullptr, nullptr);
    if (image_path) {
      std::error_code ec;
      std::filesystem::remove(*image_path, ec);
    }
    throw;
  }
  impl_->last_timestamp = r.submitted_at;
  return r;
}

std::optional<CaseRecord> CaseStore::get(const std::string& case_id) const {
  Impl::Reader reader(impl_.get());
  Statement s(reader.db, std::string("SELECT ") + kColumns + " FROM cases WHERE case_id = ?");
  s.bind(1, case_id);
  if (!s.step()) return std::nullopt;
  return read_record(s);
}

CasePage CaseStore::list(const CaseFilter& filter, std::size_t limit, std::size_t offset) const {
  const auto where = build_where(filter, options_.positive_class);
  Impl::Reader reader(impl_.get());
  CasePage page;
  page.limit = limit;
  page.offset = offset;
  {
    Statement c(reader.db, "SELECT COUNT(*) FROM cases" + where.sql);
    bind_args(c, where.args);
    c.step();
    page.total = static_cast<std::size_t>(c.integer(0));
  }
  Statement s(reader.db, std::string("SELECT ") + kColumns + " FROM cases" + where.sql + " ORDER BY seq LIMIT ? OFFSET ?");
  bind_args(s, where.args);
  const int n = static_cast<int>(where.args.size());
  s.bind(n + 1, static_cast<std::int64_t>(limit));
  s.bind(n + 2, static_cast<std::int64_t>(offset));
  while (s.step()) page.items.push_back(read_record(s));
  return page;
}

std::vector<CaseRecord> CaseStore::scan(const CaseFilter& filter) const {
  const auto where = build_where(filter, options_.positive_class);
  Impl::Reader reader(impl_.get());
  Statement s(reader.db, std::string("SELECT ") + kColumns + " FROM cases" + where.sql + " ORDER BY seq");
  bind_args(s, where.args);
  std::vector<CaseRecord> out;
  while (s.step()) out.push_back(read_record(s));
  return out;
}

std::size_t CaseStore::count() const {
  Impl::Reader reader(impl_.get());
  Statement s(reader.db, "SELECT COUNT(*) FROM cases");
  s.step();
  return static_cast<std::size_t>(s.integer(0));
}

bool CaseStore::reachable() const {
  try {
    Impl::Reader reader(impl_.get());
    Statement s(reader.db, "SELECT 1");
    return s.step();
  } catch (const Error& e) {
    log::warn(e.what());
    return false;
  }
}

std::size_t CaseStore::export_json(const std::filesystem::path& dir) const {
  CaseFilter all;
  all.include_opted_out = true;
  const auto records = scan(all);
  for (const auto& r : records) write_file(dir / (r.case_id + ".json"), r.to_json().dump(2) + "\n");
  return records.size();
}

}  // namespace itmainn::service
