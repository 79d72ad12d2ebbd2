#include "itmainn/service/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "itmainn/core/error.hpp"
#include "itmainn/core/io.hpp"

namespace itmainn::service {

namespace {

double radians(double degrees) { return degrees * std::numbers::pi / 180.0; }

std::vector<std::vector<std::string>> parse_csv_rows(const std::string& text, const std::string& source,
                                                     std::vector<int>& row_lines) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  int line = 1;
  int row_line = 1;
  auto end_field = [&] {
    row.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    const bool blank = row.size() == 1 && row[0].empty();
    if (!blank) {
      rows.push_back(std::move(row));
      row_lines.push_back(row_line);
    }
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_row();
      ++line;
      row_line = line;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) fail(ErrorKind::kConfigError, source + ":" + std::to_string(row_line) + ": unterminated quote");
  if (field_started || !row.empty()) end_row();
  return rows;
}

double parse_degrees(const std::string& text, const std::string& where) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(value)) {
    fail(ErrorKind::kConfigError, where + ": '" + text + "' is not a number");
  }
  return value;
}

}  // namespace

void check_coordinates(const LatLon& p) {
  if (!(p.lat >= -90.0 && p.lat <= 90.0) || !(p.lon >= -180.0 && p.lon <= 180.0)) {
    fail(ErrorKind::kCoordinateOutOfRange,
         "(" + std::to_string(p.lat) + ", " + std::to_string(p.lon) + ") outside [-90,90] x [-180,180]");
  }
}

double haversine(const LatLon& a, const LatLon& b) {
  check_coordinates(a);
  check_coordinates(b);
  const double dlat = radians(b.lat - a.lat);
  const double dlon = radians(b.lon - a.lon);
  const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(radians(a.lat)) * std::cos(radians(b.lat)) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(s)));
}

void HealthCenter::validate() const {
  if (center_id.empty()) fail(ErrorKind::kInvalidArgument, "health center without center_id");
  if (name.empty()) fail(ErrorKind::kInvalidArgument, "health center " + center_id + " has an empty name");
  check_coordinates(location);
}

nlohmann::json HealthCenter::to_json() const {
  return {{"center_id", center_id},
          {"name", name},
          {"lat", location.lat},
          {"lon", location.lon},
          {"contact", contact}};
}

std::vector<CenterDistance> nearest_centers(const std::vector<HealthCenter>& registry, const LatLon& origin,
                                            int limit) {
  if (registry.empty()) fail(ErrorKind::kEmptyRegistry, "no health centers registered");
  if (limit < 1) fail(ErrorKind::kInvalidArgument, "limit must be >= 1");
  check_coordinates(origin);
  std::vector<CenterDistance> out;
  out.reserve(registry.size());
  for (const auto& c : registry) out.push_back({c, haversine(origin, c.location)});
  const auto keep = std::min<std::size_t>(out.size(), static_cast<std::size_t>(limit));
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep), out.end(),
                    [](const CenterDistance& a, const CenterDistance& b) {
                      if (a.distance_km != b.distance_km) return a.distance_km < b.distance_km;
                      return a.center.center_id < b.center.center_id;
                    });
  out.resize(keep);
  return out;
}

std::vector<HealthCenter> parse_health_centers_csv(const std::string& text, const std::string& source) {
  std::vector<int> lines;
  auto rows = parse_csv_rows(text, source, lines);
  const std::vector<std::string> header{"center_id", "name", "lat", "lon", "contact"};
  if (rows.empty() || rows[0] != header) {
    fail(ErrorKind::kConfigError, source + ":1: expected header center_id,name,lat,lon,contact");
  }
  std::vector<HealthCenter> centers;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::string where = source + ":" + std::to_string(lines[r]);
    const auto& f = rows[r];
    if (f.size() != header.size()) {
      fail(ErrorKind::kConfigError, where + ": expected 5 fields, got " + std::to_string(f.size()));
    }
    HealthCenter c{f[0], f[1], {parse_degrees(f[2], where), parse_degrees(f[3], where)}, f[4]};
    try {
      c.validate();
    } catch (const Error& e) {
      fail(ErrorKind::kConfigError, where + ": " + e.detail());
    }
    if (!seen.insert(c.center_id).second) {
      fail(ErrorKind::kConfigError, where + ": duplicate center_id " + c.center_id);
    }
    centers.push_back(std::move(c));
  }
  return centers;
}

std::vector<HealthCenter> load_health_centers(const std::filesystem::path& path) {
  return parse_health_centers_csv(read_file_text(path), path.string());
}

}  // namespace itmainn::service
