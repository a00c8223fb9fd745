#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pageprobe/record.hpp"

namespace pageprobe {

struct TimeRange {
  std::optional<Timestamp> from;  // inclusive
  std::optional<Timestamp> to;    // exclusive

  bool contains(Timestamp t) const { return (!from || t >= *from) && (!to || t < *to); }
  bool operator==(const TimeRange&) const = default;
};

// Conjunctive filters over the visualization dimensions. Unset fields match
// everything.
struct QueryFilter {
  std::optional<std::string> website;
  std::optional<std::string> browser;          // "Chrome" or "Chrome/75"
  std::optional<AccessNetwork> access_network;
  std::optional<std::string> probe_location;   // "Lannion", "FR" or "Lannion,FR"
  std::optional<Viewport> window;
  std::optional<bool> adblock;
  std::optional<RequestedProtocol> requested_protocol;
  std::optional<TimeRange> time_range;         // "2019-01-01T00:00:00Z..2019-02-01T00:00:00Z"
  std::optional<std::string> provider;         // records with at least one resource from it

  static const std::vector<std::string>& keys();

  // Builds a filter from key=value pairs. Throws Error(FilterError) on an
  // unknown key or an unparseable value.
  static QueryFilter parse(const std::vector<std::pair<std::string, std::string>>& pairs);
  static std::pair<std::string, std::string> split_pair(std::string_view key_eq_value);

  bool matches(const MeasurementRecord& r) const;
  bool empty() const;

  // Canonical key=value form, used to echo filters in reports.
  std::vector<std::pair<std::string, std::string>> describe() const;

  bool operator==(const QueryFilter&) const = default;
};

struct StoredRecord {
  std::uint64_t id = 0;
  MeasurementRecord record;
};

// Append-only JSON-lines file. Each line is
//   {"id":N,"crc32":"xxxxxxxx","record":{...}}
// where the checksum covers the compact dump of the record object.
//
// One writer per file (enforced with an advisory lock held by the writer);
// readers never lock. A final line without its newline is an append in
// progress and is skipped.
class RecordStore {
 public:
  explicit RecordStore(std::string path);
  ~RecordStore();

  RecordStore(const RecordStore&) = delete;
  RecordStore& operator=(const RecordStore&) = delete;

  const std::string& path() const { return path_; }

  // Durable (fsync'ed) before returning. Throws Error(StoreFailure).
  std::uint64_t append(const MeasurementRecord& record);

  // Every complete line in file order. Throws Error(StoreCorrupt) on a bad
  // checksum or an unparseable line; a missing file reads as empty.
  std::vector<StoredRecord> scan() const;

  // Matching records ordered by timestamp, ties in append order.
  std::vector<MeasurementRecord> query(const QueryFilter& filter) const;

 private:
  void open_writer();

  std::string path_;
  int fd_ = -1;
  std::uint64_t next_id_ = 0;
};

std::uint32_t crc32_of(std::string_view bytes);

}  // namespace pageprobe
