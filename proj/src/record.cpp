#include "pageprobe/record.hpp"

#include <algorithm>
#include <tuple>

#include "pageprobe/error.hpp"

namespace pageprobe {

using nlohmann::json;

std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::Complete: return "complete";
    case SessionStatus::Timeout: return "timeout";
    case SessionStatus::Failed: return "failed";
  }
  return "failed";
}

std::optional<SessionStatus> session_status_from_string(std::string_view s) {
  for (auto v : {SessionStatus::Complete, SessionStatus::Timeout, SessionStatus::Failed}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

bool MeasurementRecord::conserves_totals() const {
  long long providers = 0, continents = 0, located = 0;
  for (const auto& [_, n] : per_provider) providers += n;
  for (const auto& [_, n] : per_continent) continents += n;
  for (const auto& loc : per_location) located += loc.count;
  return providers == stats.resource_count && continents + unattributed_count == stats.resource_count &&
         located == continents;
}

MeasurementRecord build_record(const HarSession& session, const SessionConfig& config,
                               std::span<const DeliveryAttribution> attributions, const Timings& timings,
                               const PublicSuffixList& suffixes) {
  std::vector<const HarEntry*> live;
  for (const auto& e : session.entries) {
    if (!e.aborted()) live.push_back(&e);
  }
  if (live.size() != attributions.size()) {
    throw Error(ErrorCode::AlignmentError, std::to_string(attributions.size()) + " attributions for " +
                                               std::to_string(live.size()) + " resources");
  }

  MeasurementRecord r;
  r.probe = config.probe;
  r.browser = config.browser;
  r.window = config.window;
  r.adblock = config.adblock;
  r.requested_protocol = config.policy.requested;
  r.url = session.page_url;
  r.website = registrable_domain(url_host(session.page_url), suffixes);
  r.timestamp = truncate_to_millis(session.started_at);
  r.timings = timings;
  r.stats = resource_stats(session, suffixes);
  r.distribution = protocol_distribution(session);
  r.quic_domains = quic_enabled_domains(session, suffixes);
  r.warnings = session.warnings;

  using LocationKey = std::tuple<std::optional<Continent>, std::optional<std::string>, std::optional<std::string>>;
  std::map<LocationKey, LocationSummary> locations;

  for (size_t i = 0; i < live.size(); ++i) {
    const HarEntry& e = *live[i];
    const DeliveryAttribution& a = attributions[i];

    auto& dom = r.per_domain[registrable_domain(url_host(e.url), suffixes)];
    ++dom.count;
    dom.bytes += std::max(e.body_size_bytes, 0LL);
    if (dom.origin_class == OriginClass::Unknown) dom.origin_class = a.origin_class;

    ++r.per_provider[a.provider];

    if (!a.location.continent) {
      ++r.unattributed_count;
      continue;
    }
    ++r.per_continent[std::string(to_string(*a.location.continent))];
    LocationKey key{a.location.continent, a.location.country, a.location.city};
    auto& loc = locations[key];
    if (loc.count == 0) {
      loc.continent = a.location.continent;
      loc.country = a.location.country;
      loc.city = a.location.city;
      loc.coordinates = a.location.coordinates;
    }
    ++loc.count;
    ++loc.per_provider[a.provider];
    ++loc.per_protocol[std::string(to_string(normalize_protocol(e.http_version_raw)))];
  }
  for (auto& [_, loc] : locations) r.per_location.push_back(std::move(loc));
  return r;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json opt(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_double(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

std::optional<std::string> opt_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

template <typename T, typename F>
T parse_enum(const json& j, F from_string, const char* what) {
  auto v = from_string(j.get<std::string>());
  if (!v) throw Error(ErrorCode::StoreCorrupt, std::string("unknown ") + what + " '" + j.get<std::string>() + "'");
  return *v;
}

json scalar_to_json(const Scalar& s) {
  return std::visit([](const auto& v) { return json(v); }, s);
}

Scalar scalar_from_json(const json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<long long>();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw Error(ErrorCode::StoreCorrupt, "extra values must be scalars");
}

json location_to_json(const LocationSummary& l) {
  json j = {{"city", opt(l.city)},
            {"country", opt(l.country)},
            {"continent", l.continent ? json(to_string(*l.continent)) : json(nullptr)},
            {"count", l.count},
            {"per_provider", l.per_provider},
            {"per_protocol", l.per_protocol}};
  j["coordinates"] = l.coordinates ? json::array({l.coordinates->lat, l.coordinates->lon}) : json(nullptr);
  return j;
}

LocationSummary location_from_json(const json& j) {
  LocationSummary l;
  l.city = opt_string(j, "city");
  l.country = opt_string(j, "country");
  if (auto c = opt_string(j, "continent")) l.continent = parse_enum<Continent>(json(*c), continent_from_string, "continent");
  if (const auto& c = j.at("coordinates"); !c.is_null()) l.coordinates = LatLon{c.at(0).get<double>(), c.at(1).get<double>()};
  l.count = j.at("count").get<long long>();
  l.per_provider = j.at("per_provider").get<std::map<std::string, long long>>();
  l.per_protocol = j.at("per_protocol").get<std::map<std::string, long long>>();
  return l;
}

}  // namespace

json to_json(const MeasurementRecord& r) {
  json mime = json::object();
  for (size_t i = 0; i < kMimeClassCount; ++i) {
    const auto& c = r.stats.per_mime_class[i];
    mime[std::string(to_string(static_cast<MimeClass>(i)))] = {{"count", c.count}, {"bytes", c.bytes}};
  }
  json counts = json::object(), fractions = json::object();
  for (size_t i = 0; i < kObservedProtocolCount; ++i) {
    std::string key(to_string(static_cast<ObservedProtocol>(i)));
    counts[key] = r.distribution.counts[i];
    fractions[key] = r.distribution.fractions[i];
  }
  json domains = json::object();
  for (const auto& [d, s] : r.per_domain) {
    domains[d] = {{"count", s.count}, {"bytes", s.bytes}, {"origin_class", to_string(s.origin_class)}};
  }
  json locations = json::array();
  for (const auto& l : r.per_location) locations.push_back(location_to_json(l));
  json extra = json::object();
  for (const auto& [k, v] : r.extra) extra[k] = scalar_to_json(v);

  return {
      {"schema_version", r.schema_version},
      {"probe",
       {{"id", r.probe.id},
        {"city", r.probe.city},
        {"country", r.probe.country},
        {"access_network", to_string(r.probe.access_network)},
        {"operator", r.probe.network_operator}}},
      {"browser", {{"name", r.browser.name}, {"version", r.browser.version}}},
      {"window", {{"width", r.window.width}, {"height", r.window.height}}},
      {"adblock", r.adblock},
      {"requested_protocol", to_string(r.requested_protocol)},
      {"website", r.website},
      {"url", r.url},
      {"timestamp", format_iso8601(r.timestamp, 3)},
      {"status", to_string(r.status)},
      {"timings",
       {{"first_paint_ms", opt(r.timings.first_paint_ms)},
        {"page_load_time_ms", r.timings.page_load_time_ms},
        {"tfvr_ms", opt(r.timings.tfvr_ms)},
        {"processing_time_ms", r.timings.processing_time_ms},
        {"network_busy_ms", r.timings.network_busy_ms},
        {"fp_source", to_string(r.timings.fp_source)}}},
      {"stats",
       {{"resource_count", r.stats.resource_count},
        {"aborted_count", r.stats.aborted_count},
        {"domain_count", r.stats.domain_count},
        {"total_body_bytes", r.stats.total_body_bytes},
        {"total_transfer_bytes", r.stats.total_transfer_bytes},
        {"per_mime_class", mime},
        {"mean_transfer_rate_bytes_per_s", r.stats.mean_transfer_rate_bytes_per_s},
        {"https_fraction", r.stats.https_fraction}}},
      {"distribution", {{"counts", counts}, {"fractions", fractions}}},
      {"per_domain", domains},
      {"per_provider", r.per_provider},
      {"per_continent", r.per_continent},
      {"unattributed_count", r.unattributed_count},
      {"per_location", locations},
      {"quic_domains", r.quic_domains},
      {"warnings", r.warnings},
      {"extra", extra},
  };
}

MeasurementRecord record_from_json(const json& j) {
  try {
    MeasurementRecord r;
    r.schema_version = j.at("schema_version").get<int>();
    const auto& p = j.at("probe");
    r.probe.id = p.at("id").get<std::string>();
    r.probe.city = p.at("city").get<std::string>();
    r.probe.country = p.at("country").get<std::string>();
    r.probe.access_network = parse_enum<AccessNetwork>(p.at("access_network"), access_network_from_string, "access_network");
    r.probe.network_operator = p.at("operator").get<std::string>();
    r.browser.name = j.at("browser").at("name").get<std::string>();
    r.browser.version = j.at("browser").at("version").get<std::string>();
    r.window.width = j.at("window").at("width").get<int>();
    r.window.height = j.at("window").at("height").get<int>();
    r.adblock = j.at("adblock").get<bool>();
    r.requested_protocol =
        parse_enum<RequestedProtocol>(j.at("requested_protocol"), requested_protocol_from_string, "requested_protocol");
    r.website = j.at("website").get<std::string>();
    r.url = j.at("url").get<std::string>();
    auto ts = parse_iso8601(j.at("timestamp").get<std::string>());
    if (!ts) throw Error(ErrorCode::StoreCorrupt, "bad timestamp");
    r.timestamp = *ts;
    r.status = parse_enum<SessionStatus>(j.at("status"), session_status_from_string, "status");

    const auto& t = j.at("timings");
    r.timings.first_paint_ms = opt_double(t, "first_paint_ms");
    r.timings.page_load_time_ms = t.at("page_load_time_ms").get<double>();
    r.timings.tfvr_ms = opt_double(t, "tfvr_ms");
    r.timings.processing_time_ms = t.at("processing_time_ms").get<double>();
    r.timings.network_busy_ms = t.at("network_busy_ms").get<double>();
    r.timings.fp_source = parse_enum<FpSource>(t.at("fp_source"), fp_source_from_string, "fp_source");

    const auto& s = j.at("stats");
    r.stats.resource_count = s.at("resource_count").get<long long>();
    r.stats.aborted_count = s.at("aborted_count").get<long long>();
    r.stats.domain_count = s.at("domain_count").get<long long>();
    r.stats.total_body_bytes = s.at("total_body_bytes").get<long long>();
    r.stats.total_transfer_bytes = s.at("total_transfer_bytes").get<long long>();
    for (size_t i = 0; i < kMimeClassCount; ++i) {
      const auto& c = s.at("per_mime_class").at(std::string(to_string(static_cast<MimeClass>(i))));
      r.stats.per_mime_class[i] = {c.at("count").get<long long>(), c.at("bytes").get<long long>()};
    }
    r.stats.mean_transfer_rate_bytes_per_s = s.at("mean_transfer_rate_bytes_per_s").get<double>();
    r.stats.https_fraction = s.at("https_fraction").get<double>();

    const auto& d = j.at("distribution");
    for (size_t i = 0; i < kObservedProtocolCount; ++i) {
      std::string key(to_string(static_cast<ObservedProtocol>(i)));
      r.distribution.counts[i] = d.at("counts").at(key).get<long long>();
      r.distribution.fractions[i] = d.at("fractions").at(key).get<double>();
    }

    for (const auto& [dom, v] : j.at("per_domain").items()) {
      r.per_domain[dom] = {v.at("count").get<long long>(), v.at("bytes").get<long long>(),
                           parse_enum<OriginClass>(v.at("origin_class"), origin_class_from_string, "origin_class")};
    }
    r.per_provider = j.at("per_provider").get<std::map<std::string, long long>>();
    r.per_continent = j.at("per_continent").get<std::map<std::string, long long>>();
    r.unattributed_count = j.at("unattributed_count").get<long long>();
    for (const auto& l : j.at("per_location")) r.per_location.push_back(location_from_json(l));
    r.quic_domains = j.at("quic_domains").get<std::set<std::string>>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& [k, v] : j.at("extra").items()) r.extra[k] = scalar_from_json(v);
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::StoreCorrupt, std::string("record schema: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::string scalar_text(const Scalar& s) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
        else if constexpr (std::is_same_v<T, long long>) return std::to_string(v);
        else if constexpr (std::is_same_v<T, double>) return format_number(v);
        else return v;
      },
      s);
}

}  // namespace

std::string records_to_csv(std::span<const MeasurementRecord> records) {
  std::vector<std::string> header = {
      "schema_version", "probe_id", "probe_city", "probe_country", "access_network", "operator", "browser_name",
      "browser_version", "window", "adblock", "requested_protocol", "website", "url", "timestamp", "status",
      "first_paint_ms", "page_load_time_ms", "tfvr_ms", "processing_time_ms", "network_busy_ms", "fp_source",
      "resource_count", "aborted_count", "domain_count", "total_body_bytes", "total_transfer_bytes",
      "mean_transfer_rate_bytes_per_s", "https_fraction"};
  for (size_t i = 0; i < kMimeClassCount; ++i) {
    std::string c(to_string(static_cast<MimeClass>(i)));
    header.push_back("mime." + c + ".count");
    header.push_back("mime." + c + ".bytes");
  }
  for (size_t i = 0; i < kObservedProtocolCount; ++i) {
    std::string p(to_string(static_cast<ObservedProtocol>(i)));
    header.push_back("protocol." + p + ".count");
    header.push_back("protocol." + p + ".fraction");
  }
  header.insert(header.end(), {"unattributed_count", "quic_domain_count", "warning_count"});

  std::set<std::string> providers, continents, extras;
  for (const auto& r : records) {
    for (const auto& [k, _] : r.per_provider) providers.insert(k);
    for (const auto& [k, _] : r.per_continent) continents.insert(k);
    for (const auto& [k, _] : r.extra) extras.insert(k);
  }
  for (const auto& k : providers) header.push_back("per_provider." + k);
  for (const auto& k : continents) header.push_back("per_continent." + k);
  for (const auto& k : extras) header.push_back("extra." + k);

  std::string out = csv_row(header);
  for (const auto& r : records) {
    std::vector<std::string> row = {
        std::to_string(r.schema_version), r.probe.id, r.probe.city, r.probe.country,
        std::string(to_string(r.probe.access_network)), r.probe.network_operator, r.browser.name, r.browser.version,
        to_string(r.window), r.adblock ? "true" : "false", std::string(to_string(r.requested_protocol)), r.website,
        r.url, format_iso8601(r.timestamp, 3), std::string(to_string(r.status)), opt_number(r.timings.first_paint_ms),
        format_number(r.timings.page_load_time_ms), opt_number(r.timings.tfvr_ms),
        format_number(r.timings.processing_time_ms), format_number(r.timings.network_busy_ms),
        std::string(to_string(r.timings.fp_source)), std::to_string(r.stats.resource_count),
        std::to_string(r.stats.aborted_count), std::to_string(r.stats.domain_count),
        std::to_string(r.stats.total_body_bytes), std::to_string(r.stats.total_transfer_bytes),
        format_number(r.stats.mean_transfer_rate_bytes_per_s), format_number(r.stats.https_fraction)};
    for (const auto& c : r.stats.per_mime_class) {
      row.push_back(std::to_string(c.count));
      row.push_back(std::to_string(c.bytes));
    }
    for (size_t i = 0; i < kObservedProtocolCount; ++i) {
      row.push_back(std::to_string(r.distribution.counts[i]));
      row.push_back(format_number(r.distribution.fractions[i]));
    }
    row.push_back(std::to_string(r.unattributed_count));
    row.push_back(std::to_string(r.quic_domains.size()));
    row.push_back(std::to_string(r.warnings.size()));
    for (const auto& k : providers) {
      auto it = r.per_provider.find(k);
      row.push_back(it == r.per_provider.end() ? "0" : std::to_string(it->second));
    }
    for (const auto& k : continents) {
      auto it = r.per_continent.find(k);
      row.push_back(it == r.per_continent.end() ? "0" : std::to_string(it->second));
    }
    for (const auto& k : extras) {
      auto it = r.extra.find(k);
      row.push_back(it == r.extra.end() ? "" : scalar_text(it->second));
    }
    out += csv_row(row);
  }
  return out;
}

}  // namespace pageprobe
