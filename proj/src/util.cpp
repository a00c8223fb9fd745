#include "pageprobe/util.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pageprobe/error.hpp"

namespace pageprobe {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::EmptySession: return "EmptySession";
    case ErrorCode::InvalidPolicy: return "InvalidPolicy";
    case ErrorCode::WhoisUnavailable: return "WhoisUnavailable";
    case ErrorCode::ResolverFailure: return "ResolverFailure";
    case ErrorCode::AlignmentError: return "AlignmentError";
    case ErrorCode::StoreCorrupt: return "StoreCorrupt";
    case ErrorCode::StoreFailure: return "StoreFailure";
    case ErrorCode::FilterError: return "FilterError";
    case ErrorCode::DriverFailure: return "DriverFailure";
    case ErrorCode::FormatMismatch: return "FormatMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

namespace {

bool read_digits(std::string_view s, size_t& pos, size_t count, int& out) {
  if (pos + count > s.size()) return false;
  int v = 0;
  for (size_t i = 0; i < count; ++i) {
    char c = s[pos + i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  pos += count;
  out = v;
  return true;
}

bool expect(std::string_view s, size_t& pos, char c) {
  if (pos < s.size() && s[pos] == c) {
    ++pos;
    return true;
  }
  return false;
}

}  // namespace

std::optional<Timestamp> parse_iso8601(std::string_view text) {
  using namespace std::chrono;
  std::string_view s = trim(text);
  size_t pos = 0;
  int y, mo, d, h = 0, mi = 0, sec = 0;
  if (!read_digits(s, pos, 4, y) || !expect(s, pos, '-') || !read_digits(s, pos, 2, mo) ||
      !expect(s, pos, '-') || !read_digits(s, pos, 2, d)) {
    return std::nullopt;
  }
  long long micros = 0;
  if (pos < s.size() && (s[pos] == 'T' || s[pos] == 't' || s[pos] == ' ')) {
    ++pos;
    if (!read_digits(s, pos, 2, h) || !expect(s, pos, ':') || !read_digits(s, pos, 2, mi)) {
      return std::nullopt;
    }
    if (expect(s, pos, ':') && !read_digits(s, pos, 2, sec)) return std::nullopt;
    if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
      ++pos;
      int digits = 0;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
        if (digits < 6) micros = micros * 10 + (s[pos] - '0');
        ++digits;
        ++pos;
      }
      if (digits == 0) return std::nullopt;
      for (int i = digits; i < 6; ++i) micros *= 10;
    }
  }
  int offset_minutes = 0;
  if (pos < s.size()) {
    char z = s[pos];
    if (z == 'Z' || z == 'z') {
      ++pos;
    } else if (z == '+' || z == '-') {
      ++pos;
      int oh, om = 0;
      if (!read_digits(s, pos, 2, oh)) return std::nullopt;
      expect(s, pos, ':');
      if (pos < s.size() && !read_digits(s, pos, 2, om)) return std::nullopt;
      offset_minutes = (z == '+' ? 1 : -1) * (oh * 60 + om);
    } else {
      return std::nullopt;
    }
  }
  if (pos != s.size()) return std::nullopt;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) return std::nullopt;
  auto tp = sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec} + microseconds{micros} -
            minutes{offset_minutes};
  return Timestamp{duration_cast<microseconds>(tp.time_since_epoch())};
}

std::string format_iso8601(Timestamp ts, int fraction_digits) {
  using namespace std::chrono;
  fraction_digits = std::clamp(fraction_digits, 0, 6);
  auto day_point = floor<days>(ts);
  year_month_day ymd{day_point};
  hh_mm_ss<microseconds> tod{ts - day_point};
  char buf[64];
  int n = std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ld", static_cast<int>(ymd.year()),
                        static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                        static_cast<long>(tod.hours().count()), static_cast<long>(tod.minutes().count()),
                        static_cast<long>(tod.seconds().count()));
  std::string out(buf, static_cast<size_t>(n));
  if (fraction_digits > 0) {
    char frac[8];
    std::snprintf(frac, sizeof frac, "%06ld", static_cast<long>(tod.subseconds().count()));
    out += '.';
    out.append(frac, static_cast<size_t>(fraction_digits));
  }
  out += 'Z';
  return out;
}

Timestamp truncate_to_millis(Timestamp ts) {
  return std::chrono::floor<std::chrono::milliseconds>(ts);
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

bool istarts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && iequals(s.substr(0, prefix.size()), prefix);
}

bool icontains(std::string_view haystack, std::string_view needle) {
  return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t at = s.find(sep, start);
    if (at == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, at - start));
    start = at + 1;
  }
  return out;
}

std::string url_scheme(std::string_view url) {
  size_t colon = url.find(':');
  if (colon == std::string_view::npos) return {};
  for (size_t i = 0; i < colon; ++i) {
    char c = url[i];
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '-' && c != '.') return {};
  }
  return to_lower(url.substr(0, colon));
}

std::string url_host(std::string_view url) {
  size_t start = url.find("//");
  if (start == std::string_view::npos) return {};
  start += 2;
  size_t end = url.find_first_of("/?#", start);
  std::string_view authority = url.substr(start, end == std::string_view::npos ? url.npos : end - start);
  if (size_t at = authority.rfind('@'); at != std::string_view::npos) authority.remove_prefix(at + 1);
  if (!authority.empty() && authority.front() == '[') {
    size_t close = authority.find(']');
    return to_lower(authority.substr(1, close == std::string_view::npos ? authority.npos : close - 1));
  }
  if (size_t colon = authority.find(':'); colon != std::string_view::npos) authority = authority.substr(0, colon);
  std::string host = to_lower(authority);
  while (!host.empty() && host.back() == '.') host.pop_back();
  return host;
}

bool is_ipv4(std::string_view s) {
  std::string tmp(s);
  in_addr addr{};
  return inet_pton(AF_INET, tmp.c_str(), &addr) == 1;
}

bool is_ipv6(std::string_view s) {
  std::string tmp(s);
  in6_addr addr{};
  return inet_pton(AF_INET6, tmp.c_str(), &addr) == 1;
}

bool is_non_routable(std::string_view ip) {
  static const char* const kBlocks[] = {
      "0.0.0.0/8",      "10.0.0.0/8", "100.64.0.0/10", "127.0.0.0/8", "169.254.0.0/16",
      "172.16.0.0/12",  "192.168.0.0/16", "::/128", "::1/128", "fc00::/7", "fe80::/10",
  };
  for (const char* block : kBlocks) {
    if (IpPrefix::parse(block)->contains(ip)) return true;
  }
  return false;
}

std::optional<IpPrefix> IpPrefix::parse(std::string_view text) {
  text = trim(text);
  IpPrefix prefix;
  std::string addr(text);
  int length = -1;
  if (size_t slash = text.find('/'); slash != std::string_view::npos) {
    addr = std::string(text.substr(0, slash));
    std::string_view len = text.substr(slash + 1);
    if (len.empty() || len.size() > 3) return std::nullopt;
    length = 0;
    for (char c : len) {
      if (c < '0' || c > '9') return std::nullopt;
      length = length * 10 + (c - '0');
    }
  }
  if (inet_pton(AF_INET, addr.c_str(), prefix.bytes_) == 1) {
    prefix.v6_ = false;
    if (length < 0) length = 32;
    if (length > 32) return std::nullopt;
  } else if (inet_pton(AF_INET6, addr.c_str(), prefix.bytes_) == 1) {
    prefix.v6_ = true;
    if (length < 0) length = 128;
    if (length > 128) return std::nullopt;
  } else {
    return std::nullopt;
  }
  prefix.length_ = length;
  return prefix;
}

bool IpPrefix::contains(std::string_view ip) const {
  std::string tmp(ip);
  unsigned char bytes[16] = {};
  int family = v6_ ? AF_INET6 : AF_INET;
  if (inet_pton(family, tmp.c_str(), bytes) != 1) return false;
  int full = length_ / 8;
  for (int i = 0; i < full; ++i) {
    if (bytes[i] != bytes_[i]) return false;
  }
  int rest = length_ % 8;
  if (rest == 0) return true;
  auto mask = static_cast<unsigned char>(0xFF << (8 - rest));
  return (bytes[full] & mask) == (bytes_[full] & mask);
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_field(fields[i]);
  }
  out += "\r\n";
  return out;
}

std::string format_number(double v) { return nlohmann::json(v).dump(); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace pageprobe
