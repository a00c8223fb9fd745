#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace pageprobe {

enum class Continent { AF, AN, AS, EU, NA, OC, SA };
inline constexpr size_t kContinentCount = 7;

std::string_view to_string(Continent c);
std::optional<Continent> continent_from_string(std::string_view s);

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;

  bool operator==(const LatLon&) const = default;
};

struct CountryInfo {
  std::string code;
  Continent continent;
  LatLon centroid;
  std::string name;
};

// Lookup in the bundled ISO 3166-1 table; code is case-insensitive.
const CountryInfo* find_country(std::string_view alpha2);
std::optional<Continent> continent_of_country(std::string_view alpha2);
LatLon continent_centroid(Continent c);

}  // namespace pageprobe
