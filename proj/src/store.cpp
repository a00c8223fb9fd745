#include "pageprobe/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "pageprobe/error.hpp"

namespace pageprobe {

using nlohmann::json;

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

namespace {

std::string hex8(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

[[noreturn]] void fail_filter(const std::string& key, const std::string& value) {
  throw Error(ErrorCode::FilterError, "bad value for " + key + ": '" + value + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// QueryFilter

const std::vector<std::string>& QueryFilter::keys() {
  static const std::vector<std::string> k = {"website", "browser", "access_network", "probe_location", "window",
                                             "adblock", "requested_protocol", "time_range", "provider"};
  return k;
}

std::pair<std::string, std::string> QueryFilter::split_pair(std::string_view key_eq_value) {
  size_t eq = key_eq_value.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorCode::FilterError, "filter must be key=value: '" + std::string(key_eq_value) + "'");
  }
  return {std::string(trim(key_eq_value.substr(0, eq))), std::string(trim(key_eq_value.substr(eq + 1)))};
}

QueryFilter QueryFilter::parse(const std::vector<std::pair<std::string, std::string>>& pairs) {
  QueryFilter f;
  for (const auto& [key, value] : pairs) {
    if (key == "website") {
      f.website = to_lower(value);
    } else if (key == "browser") {
      f.browser = value;
    } else if (key == "access_network") {
      f.access_network = access_network_from_string(value);
      if (!f.access_network) fail_filter(key, value);
    } else if (key == "probe_location") {
      f.probe_location = value;
    } else if (key == "window") {
      f.window = parse_window(value);
      if (!f.window) fail_filter(key, value);
    } else if (key == "adblock") {
      std::string v = to_lower(value);
      if (v == "true" || v == "1" || v == "yes") f.adblock = true;
      else if (v == "false" || v == "0" || v == "no") f.adblock = false;
      else fail_filter(key, value);
    } else if (key == "requested_protocol") {
      f.requested_protocol = requested_protocol_from_string(value);
      if (!f.requested_protocol) fail_filter(key, value);
    } else if (key == "time_range") {
      size_t dots = value.find("..");
      if (dots == std::string::npos) fail_filter(key, value);
      TimeRange range;
      std::string from = value.substr(0, dots), to = value.substr(dots + 2);
      if (!trim(from).empty() && !(range.from = parse_iso8601(from))) fail_filter(key, value);
      if (!trim(to).empty() && !(range.to = parse_iso8601(to))) fail_filter(key, value);
      f.time_range = range;
    } else if (key == "provider") {
      f.provider = value;
    } else {
      throw Error(ErrorCode::FilterError, "unknown filter key '" + key + "'");
    }
  }
  return f;
}

bool QueryFilter::matches(const MeasurementRecord& r) const {
  if (website && !iequals(*website, r.website)) return false;
  if (browser) {
    size_t slash = browser->find('/');
    if (slash == std::string::npos) {
      if (!iequals(*browser, r.browser.name)) return false;
    } else if (!iequals(browser->substr(0, slash), r.browser.name) || browser->substr(slash + 1) != r.browser.version) {
      return false;
    }
  }
  if (access_network && *access_network != r.probe.access_network) return false;
  if (probe_location) {
    size_t comma = probe_location->find(',');
    if (comma == std::string::npos) {
      if (!iequals(*probe_location, r.probe.city) && !iequals(*probe_location, r.probe.country)) return false;
    } else if (!iequals(trim(probe_location->substr(0, comma)), r.probe.city) ||
               !iequals(trim(probe_location->substr(comma + 1)), r.probe.country)) {
      return false;
    }
  }
  if (window && *window != r.window) return false;
  if (adblock && *adblock != r.adblock) return false;
  if (requested_protocol && *requested_protocol != r.requested_protocol) return false;
  if (time_range && !time_range->contains(r.timestamp)) return false;
  if (provider) {
    auto it = r.per_provider.find(*provider);
    if (it == r.per_provider.end() || it->second <= 0) return false;
  }
  return true;
}

bool QueryFilter::empty() const { return *this == QueryFilter{}; }

std::vector<std::pair<std::string, std::string>> QueryFilter::describe() const {
  std::vector<std::pair<std::string, std::string>> out;
  if (website) out.emplace_back("website", *website);
  if (browser) out.emplace_back("browser", *browser);
  if (access_network) out.emplace_back("access_network", std::string(to_string(*access_network)));
  if (probe_location) out.emplace_back("probe_location", *probe_location);
  if (window) out.emplace_back("window", to_string(*window));
  if (adblock) out.emplace_back("adblock", *adblock ? "true" : "false");
  if (requested_protocol) out.emplace_back("requested_protocol", std::string(to_string(*requested_protocol)));
  if (time_range) {
    out.emplace_back("time_range", (time_range->from ? format_iso8601(*time_range->from, 3) : std::string()) + ".." +
                                       (time_range->to ? format_iso8601(*time_range->to, 3) : std::string()));
  }
  if (provider) out.emplace_back("provider", *provider);
  return out;
}

// ---------------------------------------------------------------------------
// RecordStore

RecordStore::RecordStore(std::string path) : path_(std::move(path)) {}

RecordStore::~RecordStore() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

void RecordStore::open_writer() {
  fd_ = ::open(path_.c_str(), O_RDWR | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error(ErrorCode::StoreFailure, "cannot open " + path_ + ": " + std::strerror(errno));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw Error(ErrorCode::StoreFailure, path_ + " is held by another writer");
  }
  // Count complete lines; drop a torn tail left by an interrupted append.
  std::string content;
  {
    std::ifstream in(path_, std::ios::binary);
    content.assign(std::istreambuf_iterator<char>(in), {});
  }
  next_id_ = static_cast<std::uint64_t>(std::count(content.begin(), content.end(), '\n'));
  if (!content.empty() && content.back() != '\n') {
    size_t keep = content.rfind('\n');
    keep = keep == std::string::npos ? 0 : keep + 1;
    if (::ftruncate(fd_, static_cast<off_t>(keep)) != 0) {
      throw Error(ErrorCode::StoreFailure, "cannot repair torn tail of " + path_);
    }
  }
}

std::uint64_t RecordStore::append(const MeasurementRecord& record) {
  if (fd_ < 0) open_writer();
  std::string body = to_json(record).dump();
  std::uint64_t id = next_id_;
  std::string line = "{\"id\":" + std::to_string(id) + ",\"crc32\":\"" + hex8(crc32_of(body)) + "\",\"record\":" +
                     body + "}\n";
  const char* p = line.data();
  size_t left = line.size();
  while (left > 0) {
    ssize_t n = ::write(fd_, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::StoreFailure, "write to " + path_ + " failed: " + std::strerror(errno));
    }
    p += n;
    left -= static_cast<size_t>(n);
  }
  if (::fsync(fd_) != 0) throw Error(ErrorCode::StoreFailure, "fsync of " + path_ + " failed");
  ++next_id_;
  return id;
}

std::vector<StoredRecord> RecordStore::scan() const {
  std::ifstream in(path_, std::ios::binary);
  std::vector<StoredRecord> out;
  if (!in) return out;
  std::string content((std::istreambuf_iterator<char>(in)), {});
  size_t pos = 0;
  size_t line_no = 0;
  while (pos < content.size()) {
    size_t nl = content.find('\n', pos);
    if (nl == std::string::npos) break;  // append in progress
    std::string_view line(content.data() + pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    json doc = json::parse(line.begin(), line.end(), nullptr, false);
    auto where = path_ + ":" + std::to_string(line_no);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("record") || !doc.contains("crc32") ||
        !doc["crc32"].is_string() || !doc.contains("id") || !doc["id"].is_number_unsigned()) {
      throw Error(ErrorCode::StoreCorrupt, where + ": unparseable line");
    }
    std::string body = doc["record"].dump();
    if (doc["crc32"].get<std::string>() != hex8(crc32_of(body))) {
      throw Error(ErrorCode::StoreCorrupt, where + ": checksum mismatch");
    }
    StoredRecord stored{doc["id"].get<std::uint64_t>(), record_from_json(doc["record"])};
    if (!stored.record.conserves_totals()) {
      throw Error(ErrorCode::StoreCorrupt, where + ": per-record totals do not add up");
    }
    out.push_back(std::move(stored));
  }
  return out;
}

std::vector<MeasurementRecord> RecordStore::query(const QueryFilter& filter) const {
  std::vector<MeasurementRecord> out;
  for (auto& s : scan()) {
    if (filter.matches(s.record)) out.push_back(std::move(s.record));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const MeasurementRecord& a, const MeasurementRecord& b) { return a.timestamp < b.timestamp; });
  return out;
}

}  // namespace pageprobe
