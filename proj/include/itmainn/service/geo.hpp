#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace itmainn::service {

inline constexpr double kEarthRadiusKm = 6371.0;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
  bool operator==(const LatLon&) const = default;
};

// Throws CoordinateOutOfRange unless lat in [-90, 90] and lon in [-180, 180].
void check_coordinates(const LatLon& point);

// Great-circle distance in km on a sphere of radius kEarthRadiusKm.
double haversine(const LatLon& a, const LatLon& b);

struct HealthCenter {
  std::string center_id;
  std::string name;
  LatLon location;
  std::string contact;

  void validate() const;
  nlohmann::json to_json() const;
};

struct CenterDistance {
  HealthCenter center;
  double distance_km = 0.0;
};

// Sorted by distance, ties by center_id, truncated to limit. Throws
// EmptyRegistry, InvalidArgument for limit < 1.
std::vector<CenterDistance> nearest_centers(const std::vector<HealthCenter>& registry, const LatLon& origin,
                                            int limit);

// Header `center_id,name,lat,lon,contact`; RFC 4180 quoting. Throws
// ConfigError with file:line on malformed rows or duplicate ids.
std::vector<HealthCenter> parse_health_centers_csv(const std::string& text, const std::string& source);
std::vector<HealthCenter> load_health_centers(const std::filesystem::path& path);

}  // namespace itmainn::service
