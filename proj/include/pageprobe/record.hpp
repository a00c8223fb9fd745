#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pageprobe/config.hpp"
#include "pageprobe/delivery.hpp"
#include "pageprobe/metrics.hpp"
#include "pageprobe/protocol.hpp"

namespace pageprobe {

inline constexpr int kRecordSchemaVersion = 1;

enum class SessionStatus { Complete, Timeout, Failed };

std::string_view to_string(SessionStatus s);
std::optional<SessionStatus> session_status_from_string(std::string_view s);

struct DomainSummary {
  long long count = 0;
  long long bytes = 0;
  OriginClass origin_class = OriginClass::Unknown;

  bool operator==(const DomainSummary&) const = default;
};

// Resources grouped by delivering server location. Rows are keyed by
// (continent, country, city); fully unlocated resources are not listed here.
struct LocationSummary {
  std::optional<std::string> city;
  std::optional<std::string> country;
  std::optional<Continent> continent;
  std::optional<LatLon> coordinates;
  long long count = 0;
  std::map<std::string, long long> per_provider;
  std::map<std::string, long long> per_protocol;

  bool operator==(const LocationSummary&) const = default;
};

using Scalar = std::variant<bool, long long, double, std::string>;

// One measured pageview.
struct MeasurementRecord {
  int schema_version = kRecordSchemaVersion;
  ProbeIdentity probe;
  BrowserInfo browser;
  Viewport window;
  bool adblock = false;
  RequestedProtocol requested_protocol = RequestedProtocol::H2;
  std::string website;
  std::string url;
  Timestamp timestamp{};
  SessionStatus status = SessionStatus::Complete;
  Timings timings;
  ResourceStats stats;
  ProtocolDistribution distribution;
  std::map<std::string, DomainSummary> per_domain;
  std::map<std::string, long long> per_provider;
  std::map<std::string, long long> per_continent;
  long long unattributed_count = 0;
  std::vector<LocationSummary> per_location;
  std::set<std::string> quic_domains;
  std::vector<std::string> warnings;
  std::map<std::string, Scalar> extra;

  // Provider counts, continent counts plus unattributed, and location counts
  // plus unattributed all equal stats.resource_count.
  bool conserves_totals() const;

  bool operator==(const MeasurementRecord&) const = default;
};

// Aggregates one session. attributions align 1:1, in order, with the
// session's non-aborted entries; Error(AlignmentError) otherwise. The record
// carries session.page_url and session.started_at; callers running a probe
// overwrite url, timestamp and status.
MeasurementRecord build_record(const HarSession& session, const SessionConfig& config,
                               std::span<const DeliveryAttribution> attributions, const Timings& timings,
                               const PublicSuffixList& suffixes = PublicSuffixList::bundled());

nlohmann::json to_json(const MeasurementRecord& r);
// Throws Error(StoreCorrupt) when the document does not describe a record.
MeasurementRecord record_from_json(const nlohmann::json& j);

// Flat CSV: one row per record, scalar columns first, then one column per
// map key (`per_provider.<name>`, `per_continent.<code>`, `extra.<key>`).
std::string records_to_csv(std::span<const MeasurementRecord> records);

}  // namespace pageprobe
