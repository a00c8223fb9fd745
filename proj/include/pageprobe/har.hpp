#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pageprobe/util.hpp"

namespace pageprobe {

// Response headers in wire order. Duplicates are kept; name lookups ignore case.
class HeaderMap {
 public:
  using Field = std::pair<std::string, std::string>;

  HeaderMap() = default;
  HeaderMap(std::initializer_list<Field> fields) : fields_(fields) {}

  void add(std::string name, std::string value) { fields_.emplace_back(std::move(name), std::move(value)); }

  std::optional<std::string_view> first(std::string_view name) const;
  std::vector<std::string_view> all(std::string_view name) const;
  bool contains(std::string_view name) const { return first(name).has_value(); }

  const std::vector<Field>& fields() const { return fields_; }
  size_t size() const { return fields_.size(); }
  bool empty() const { return fields_.empty(); }

  bool operator==(const HeaderMap&) const = default;

 private:
  std::vector<Field> fields_;
};

// Per-phase durations in milliseconds; -1 marks a phase the capture did not report.
struct PhaseTimes {
  static constexpr double kAbsent = -1.0;

  double blocked = kAbsent;
  double dns = kAbsent;
  double connect = kAbsent;
  double ssl = kAbsent;
  double send = kAbsent;
  double wait = kAbsent;
  double receive = kAbsent;

  static bool present(double v) { return v >= 0.0; }
  // Sum of the present phases. ssl is excluded because HAR counts it inside connect.
  double present_sum() const;

  bool operator==(const PhaseTimes&) const = default;
};

struct HarEntry {
  std::string url;
  std::string method = "GET";
  int status = 0;
  std::string http_version_raw;
  HeaderMap response_headers;
  std::string mime_type;
  long long body_size_bytes = -1;
  long long transfer_size_bytes = -1;
  std::optional<std::string> server_ip;
  double start_offset_ms = 0.0;
  double total_time_ms = 0.0;
  PhaseTimes phase_times;

  double end_offset_ms() const { return start_offset_ms + total_time_ms; }
  bool aborted() const { return status <= 0; }

  bool operator==(const HarEntry&) const = default;
};

struct HarSession {
  std::string page_url;
  Timestamp started_at{};
  std::string browser_name;
  std::string browser_version;
  std::optional<double> on_content_load_ms;
  std::optional<double> on_load_ms;
  std::vector<HarEntry> entries;
  std::vector<std::string> warnings;

  bool operator==(const HarSession&) const = default;
};

// Parses a HAR 1.x document. Throws Error(MalformedDocument) when the input
// is not JSON or has no `log` object, Error(UnsupportedVersion) when the
// declared major version is not 1.
HarSession parse_har(std::string_view document);

// Writes a HAR 1.2 document that parse_har reads back into an equal session
// (warnings excepted). Used for fixtures and round-trip checks.
std::string write_har(const HarSession& session);

}  // namespace pageprobe
