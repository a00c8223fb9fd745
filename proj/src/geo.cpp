#include "pageprobe/geo.hpp"

#include <cctype>
#include <cstdlib>
#include <unordered_map>

#include "pageprobe/util.hpp"

namespace pageprobe {

extern const char kBundledCountries[];

std::string_view to_string(Continent c) {
  switch (c) {
    case Continent::AF: return "AF";
    case Continent::AN: return "AN";
    case Continent::AS: return "AS";
    case Continent::EU: return "EU";
    case Continent::NA: return "NA";
    case Continent::OC: return "OC";
    case Continent::SA: return "SA";
  }
  return "";
}

std::optional<Continent> continent_from_string(std::string_view s) {
  for (size_t i = 0; i < kContinentCount; ++i) {
    auto c = static_cast<Continent>(i);
    if (iequals(to_string(c), s)) return c;
  }
  return std::nullopt;
}

namespace {

const std::unordered_map<std::string, CountryInfo>& country_table() {
  static const auto table = [] {
    std::unordered_map<std::string, CountryInfo> t;
    for (const auto& line : split(kBundledCountries, '\n')) {
      if (line.empty() || line[0] == '#') continue;
      auto cols = split(line, '\t');
      if (cols.size() < 5) continue;
      auto continent = continent_from_string(cols[1]);
      if (!continent) continue;
      CountryInfo info{cols[0], *continent, {std::strtod(cols[2].c_str(), nullptr), std::strtod(cols[3].c_str(), nullptr)},
                       cols[4]};
      t.emplace(cols[0], std::move(info));
    }
    return t;
  }();
  return table;
}

}  // namespace

const CountryInfo* find_country(std::string_view alpha2) {
  std::string key(trim(alpha2));
  for (auto& c : key) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  const auto& table = country_table();
  auto it = table.find(key);
  return it == table.end() ? nullptr : &it->second;
}

std::optional<Continent> continent_of_country(std::string_view alpha2) {
  const CountryInfo* info = find_country(alpha2);
  if (!info) return std::nullopt;
  return info->continent;
}

LatLon continent_centroid(Continent c) {
  switch (c) {
    case Continent::AF: return {1.65, 17.68};
    case Continent::AN: return {-82.86, 135.0};
    case Continent::AS: return {34.05, 100.62};
    case Continent::EU: return {54.53, 15.26};
    case Continent::NA: return {45.0, -100.0};
    case Continent::OC: return {-22.74, 140.02};
    case Continent::SA: return {-8.78, -55.49};
  }
  return {};
}

}  // namespace pageprobe
