#include "pageprobe/har.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "pageprobe/error.hpp"

namespace pageprobe {

using nlohmann::json;

std::optional<std::string_view> HeaderMap::first(std::string_view name) const {
  for (const auto& [k, v] : fields_) {
    if (iequals(k, name)) return std::string_view(v);
  }
  return std::nullopt;
}

std::vector<std::string_view> HeaderMap::all(std::string_view name) const {
  std::vector<std::string_view> out;
  for (const auto& [k, v] : fields_) {
    if (iequals(k, name)) out.emplace_back(v);
  }
  return out;
}

double PhaseTimes::present_sum() const {
  double sum = 0.0;
  for (double v : {blocked, dns, connect, send, wait, receive}) {
    if (present(v)) sum += v;
  }
  return sum;
}

namespace {

constexpr double kRoundingSlackMs = 1.0;

std::optional<double> number_at(const json& obj, const char* key) {
  if (!obj.is_object()) return std::nullopt;
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) return std::nullopt;
  double v = it->get<double>();
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

std::string string_at(const json& obj, const char* key) {
  if (!obj.is_object()) return {};
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) return {};
  return it->get<std::string>();
}

const json& object_at(const json& obj, const char* key) {
  static const json kEmpty = json::object();
  if (!obj.is_object()) return kEmpty;
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_object()) return kEmpty;
  return *it;
}

long long size_at(const json& obj, const char* key) {
  auto v = number_at(obj, key);
  if (!v || *v < 0) return -1;
  return static_cast<long long>(*v);
}

// Returns false when a phase carries a value HAR does not allow.
bool read_phase(const json& timings, const char* key, double& out) {
  out = PhaseTimes::kAbsent;
  if (!timings.contains(key)) return true;
  auto v = number_at(timings, key);
  if (!v) return false;
  if (*v >= 0.0) {
    out = *v;
    return true;
  }
  return *v == -1.0;
}

std::optional<std::string> normalize_ip(std::string raw) {
  std::string_view ip = trim(raw);
  if (ip.size() >= 2 && ip.front() == '[' && ip.back() == ']') ip = ip.substr(1, ip.size() - 2);
  if (!is_ip_literal(ip)) return std::nullopt;
  return std::string(ip);
}

struct RawEntry {
  HarEntry entry;
  std::optional<Timestamp> started;
};

RawEntry parse_entry(const json& item, size_t index, std::vector<std::string>& warnings) {
  RawEntry raw;
  HarEntry& e = raw.entry;
  const json& request = object_at(item, "request");
  const json& response = object_at(item, "response");
  e.url = string_at(request, "url");
  e.method = string_at(request, "method");
  if (auto st = number_at(response, "status"); st && *st >= 0 && *st <= 999) e.status = static_cast<int>(*st);
  e.http_version_raw = string_at(response, "httpVersion");
  if (e.http_version_raw.empty()) e.http_version_raw = string_at(request, "httpVersion");

  if (auto it = response.find("headers"); it != response.end() && it->is_array()) {
    for (const auto& h : *it) {
      if (!h.is_object()) continue;
      e.response_headers.add(string_at(h, "name"), string_at(h, "value"));
    }
  }
  const json& content = object_at(response, "content");
  e.mime_type = string_at(content, "mimeType");
  e.body_size_bytes = size_at(response, "bodySize");
  if (e.body_size_bytes < 0) e.body_size_bytes = size_at(content, "size");
  e.transfer_size_bytes = size_at(response, "_transferSize");
  if (e.transfer_size_bytes < 0) {
    long long headers = size_at(response, "headersSize");
    long long body = size_at(response, "bodySize");
    if (headers >= 0 && body >= 0) e.transfer_size_bytes = headers + body;
  }

  std::string ip = string_at(item, "serverIPAddress");
  if (!trim(ip).empty()) {
    e.server_ip = normalize_ip(ip);
    if (!e.server_ip) warnings.push_back("entry " + std::to_string(index) + ": invalid serverIPAddress '" + ip + "'");
  }

  const json& timings = object_at(item, "timings");
  PhaseTimes& p = e.phase_times;
  bool ok = read_phase(timings, "blocked", p.blocked) && read_phase(timings, "dns", p.dns) &&
            read_phase(timings, "connect", p.connect) && read_phase(timings, "ssl", p.ssl) &&
            read_phase(timings, "send", p.send) && read_phase(timings, "wait", p.wait) &&
            read_phase(timings, "receive", p.receive);
  auto total = number_at(item, "time");
  if (total && *total >= 0.0) {
    e.total_time_ms = *total;
  } else {
    e.total_time_ms = ok ? p.present_sum() : 0.0;
    warnings.push_back("entry " + std::to_string(index) + ": missing or negative time");
  }
  if (!ok || p.present_sum() > e.total_time_ms + kRoundingSlackMs) {
    p = PhaseTimes{};
    warnings.push_back("entry " + std::to_string(index) + ": malformed timings, phases dropped");
  }

  raw.started = parse_iso8601(string_at(item, "startedDateTime"));
  if (!raw.started) warnings.push_back("entry " + std::to_string(index) + ": unparseable startedDateTime");
  return raw;
}

}  // namespace

HarSession parse_har(std::string_view document) {
  json root = json::parse(document.begin(), document.end(), nullptr, false);
  if (root.is_discarded()) throw Error(ErrorCode::MalformedDocument, "not valid JSON");
  if (!root.is_object() || !root.contains("log") || !root["log"].is_object()) {
    throw Error(ErrorCode::MalformedDocument, "missing `log` object");
  }
  const json& log = root["log"];

  std::string version = string_at(log, "version");
  if (!version.empty() && version.substr(0, version.find('.')) != "1") {
    throw Error(ErrorCode::UnsupportedVersion, "HAR version " + version);
  }

  HarSession session;
  const json& browser = log.contains("browser") ? object_at(log, "browser") : object_at(log, "creator");
  session.browser_name = string_at(browser, "name");
  session.browser_version = string_at(browser, "version");

  std::string page_id;
  std::optional<Timestamp> page_start;
  if (auto it = log.find("pages"); it != log.end() && it->is_array() && !it->empty()) {
    const json& page = (*it)[0];
    if (it->size() > 1) {
      session.warnings.push_back("HAR has " + std::to_string(it->size()) + " pages; only the first is analyzed");
    }
    page_id = string_at(page, "id");
    page_start = parse_iso8601(string_at(page, "startedDateTime"));
    std::string title = string_at(page, "title");
    if (title.find("://") != std::string::npos) session.page_url = title;
    const json& pt = object_at(page, "pageTimings");
    if (auto v = number_at(pt, "onContentLoad"); v && *v >= 0) session.on_content_load_ms = v;
    if (auto v = number_at(pt, "onLoad"); v && *v >= 0) session.on_load_ms = v;
  }

  std::vector<RawEntry> raw;
  if (auto it = log.find("entries"); it != log.end() && it->is_array()) {
    size_t index = 0;
    for (const auto& item : *it) {
      if (!item.is_object()) {
        session.warnings.push_back("entry " + std::to_string(index++) + ": not an object, skipped");
        continue;
      }
      if (!page_id.empty()) {
        std::string ref = string_at(item, "pageref");
        if (!ref.empty() && ref != page_id) {
          ++index;
          continue;
        }
      }
      raw.push_back(parse_entry(item, index++, session.warnings));
    }
  }

  if (!page_start) {
    for (const auto& r : raw) {
      if (r.started && (!page_start || *r.started < *page_start)) page_start = r.started;
    }
  }
  session.started_at = page_start.value_or(Timestamp{});

  bool clamped = false;
  session.entries.reserve(raw.size());
  for (auto& r : raw) {
    if (r.started && page_start) {
      double offset = static_cast<double>((*r.started - *page_start).count()) / 1000.0;
      if (offset < 0.0) {
        offset = 0.0;
        clamped = true;
      }
      r.entry.start_offset_ms = offset;
    }
    session.entries.push_back(std::move(r.entry));
  }
  if (clamped) session.warnings.push_back("entries starting before navigation start were clamped to 0");
  std::stable_sort(session.entries.begin(), session.entries.end(),
                   [](const HarEntry& a, const HarEntry& b) { return a.start_offset_ms < b.start_offset_ms; });

  if (session.page_url.empty() && !session.entries.empty()) session.page_url = session.entries.front().url;
  return session;
}

std::string write_har(const HarSession& session) {
  json entries = json::array();
  for (const auto& e : session.entries) {
    json headers = json::array();
    for (const auto& [k, v] : e.response_headers.fields()) headers.push_back({{"name", k}, {"value", v}});
    auto started = session.started_at + std::chrono::microseconds(std::llround(e.start_offset_ms * 1000.0));
    const PhaseTimes& p = e.phase_times;
    json item = {
        {"pageref", "page_1"},
        {"startedDateTime", format_iso8601(started, 6)},
        {"time", e.total_time_ms},
        {"request",
         {{"method", e.method}, {"url", e.url}, {"httpVersion", e.http_version_raw}, {"headers", json::array()},
          {"queryString", json::array()}, {"cookies", json::array()}, {"headersSize", -1}, {"bodySize", 0}}},
        {"response",
         {{"status", e.status},
          {"statusText", ""},
          {"httpVersion", e.http_version_raw},
          {"headers", headers},
          {"cookies", json::array()},
          {"content", {{"size", e.body_size_bytes}, {"mimeType", e.mime_type}}},
          {"redirectURL", ""},
          {"headersSize", -1},
          {"bodySize", e.body_size_bytes},
          {"_transferSize", e.transfer_size_bytes}}},
        {"cache", json::object()},
        {"timings",
         {{"blocked", p.blocked},
          {"dns", p.dns},
          {"connect", p.connect},
          {"ssl", p.ssl},
          {"send", p.send},
          {"wait", p.wait},
          {"receive", p.receive}}},
    };
    if (e.server_ip) item["serverIPAddress"] = *e.server_ip;
    entries.push_back(std::move(item));
  }
  json doc = {
      {"log",
       {{"version", "1.2"},
        {"creator", {{"name", "pageprobe"}, {"version", "1.0"}}},
        {"browser", {{"name", session.browser_name}, {"version", session.browser_version}}},
        {"pages",
         {{{"id", "page_1"},
           {"startedDateTime", format_iso8601(session.started_at, 6)},
           {"title", session.page_url},
           {"pageTimings",
            {{"onContentLoad", session.on_content_load_ms.value_or(-1.0)},
             {"onLoad", session.on_load_ms.value_or(-1.0)}}}}}},
        {"entries", entries}}},
  };
  return doc.dump(2);
}

}  // namespace pageprobe
