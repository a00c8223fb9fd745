#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pageprobe {

using Timestamp = std::chrono::sys_time<std::chrono::microseconds>;

// ISO 8601 / RFC 3339 timestamps as found in HAR files. Any number of
// fractional digits is accepted (truncated to microseconds); a missing zone
// designator is read as UTC.
std::optional<Timestamp> parse_iso8601(std::string_view text);

// "2019-02-01T10:00:00.123456Z"; fraction_digits in [0, 6].
std::string format_iso8601(Timestamp ts, int fraction_digits = 3);

Timestamp truncate_to_millis(Timestamp ts);

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);
bool icontains(std::string_view haystack, std::string_view needle);
std::vector<std::string> split(std::string_view s, char sep);

// Host part of an absolute URL, lowercased, without port or IPv6 brackets.
// Empty when the URL has no authority.
std::string url_host(std::string_view url);
std::string url_scheme(std::string_view url);

bool is_ipv4(std::string_view s);
bool is_ipv6(std::string_view s);
inline bool is_ip_literal(std::string_view s) { return is_ipv4(s) || is_ipv6(s); }

// RFC 1918, loopback, link-local, CGNAT, unique-local and unspecified ranges.
bool is_non_routable(std::string_view ip);

// CIDR block ("151.101.0.0/16", "2a04:4e42::/32") or a bare address, which is
// read as a host route.
class IpPrefix {
 public:
  static std::optional<IpPrefix> parse(std::string_view text);

  bool contains(std::string_view ip) const;
  int length() const { return length_; }
  bool is_v6() const { return v6_; }

 private:
  bool v6_ = false;
  int length_ = 0;
  unsigned char bytes_[16] = {};
};

// RFC 4180 field quoting, applied only when the value needs it.
std::string csv_field(std::string_view value);
std::string csv_row(const std::vector<std::string>& fields);

// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

// Loads a whole file; throws Error(ConfigError) when it cannot be read.
std::string read_file(const std::string& path);

}  // namespace pageprobe
