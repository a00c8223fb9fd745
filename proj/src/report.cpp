#include "pageprobe/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "pageprobe/error.hpp"
#include "pageprobe/geo.hpp"

namespace pageprobe {

using nlohmann::json;

namespace {

template <typename E, size_t N>
std::optional<E> enum_from(std::string_view s, const std::array<E, N>& all) {
  for (E e : all) {
    if (iequals(to_string(e), s)) return e;
  }
  return std::nullopt;
}

constexpr std::array kKinds = {ReportKind::ProtocolPanel, ReportKind::GeoPanel, ReportKind::CdnTable,
                               ReportKind::Timeseries, ReportKind::Compare};
constexpr std::array kGroupBys = {GroupBy::Protocol, GroupBy::Provider, GroupBy::Continent, GroupBy::Country,
                                  GroupBy::City};
constexpr std::array kMetrics = {Metric::Count, Metric::Plt, Metric::Tfvr, Metric::Fp, Metric::Processing};
constexpr std::array kDimensions = {CompareDimension::Browser, CompareDimension::RequestedProtocol};
constexpr std::array kFormats = {ReportFormat::Json, ReportFormat::Csv, ReportFormat::GeoJson, ReportFormat::Html};

}  // namespace

std::string_view to_string(ReportKind k) {
  switch (k) {
    case ReportKind::ProtocolPanel: return "protocol_panel";
    case ReportKind::GeoPanel: return "geo_panel";
    case ReportKind::CdnTable: return "cdn_table";
    case ReportKind::Timeseries: return "timeseries";
    case ReportKind::Compare: return "compare";
  }
  return "";
}

std::string_view to_string(GroupBy g) {
  switch (g) {
    case GroupBy::Protocol: return "protocol";
    case GroupBy::Provider: return "provider";
    case GroupBy::Continent: return "continent";
    case GroupBy::Country: return "country";
    case GroupBy::City: return "city";
  }
  return "";
}

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::Count: return "count";
    case Metric::Plt: return "plt";
    case Metric::Tfvr: return "tfvr";
    case Metric::Fp: return "fp";
    case Metric::Processing: return "processing";
  }
  return "";
}

std::string_view to_string(CompareDimension d) {
  switch (d) {
    case CompareDimension::Browser: return "browser";
    case CompareDimension::RequestedProtocol: return "requested_protocol";
  }
  return "";
}

std::string_view to_string(ReportFormat f) {
  switch (f) {
    case ReportFormat::Json: return "json";
    case ReportFormat::Csv: return "csv";
    case ReportFormat::GeoJson: return "geojson";
    case ReportFormat::Html: return "html";
  }
  return "";
}

std::optional<ReportKind> report_kind_from_string(std::string_view s) { return enum_from(s, kKinds); }
std::optional<GroupBy> group_by_from_string(std::string_view s) { return enum_from(s, kGroupBys); }
std::optional<Metric> metric_from_string(std::string_view s) { return enum_from(s, kMetrics); }
std::optional<CompareDimension> compare_dimension_from_string(std::string_view s) {
  return enum_from(s, kDimensions);
}
std::optional<ReportFormat> report_format_from_string(std::string_view s) { return enum_from(s, kFormats); }

size_t Report::column(std::string_view name) const {
  for (size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw std::out_of_range("no column " + std::string(name));
}

// ---------------------------------------------------------------------------
// Aggregation

namespace {

struct Summary {
  long long n = 0;
  double mean = 0, median = 0, p90 = 0;
};

Summary summarize(std::vector<double> v) {
  Summary s;
  s.n = static_cast<long long>(v.size());
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  double sum = 0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  size_t mid = v.size() / 2;
  s.median = v.size() % 2 ? v[mid] : (v[mid - 1] + v[mid]) / 2.0;
  size_t rank = static_cast<size_t>(std::ceil(0.9 * static_cast<double>(v.size())));
  s.p90 = v[std::max<size_t>(rank, 1) - 1];
  return s;
}

std::optional<double> metric_value(const MeasurementRecord& r, Metric m) {
  switch (m) {
    case Metric::Count: return static_cast<double>(r.stats.resource_count);
    case Metric::Plt: return r.timings.page_load_time_ms;
    case Metric::Tfvr: return r.timings.tfvr_ms;
    case Metric::Fp: return r.timings.first_paint_ms;
    case Metric::Processing: return r.timings.processing_time_ms;
  }
  return std::nullopt;
}

[[noreturn]] void bad_option(ReportKind kind, const std::string& what) {
  throw Error(ErrorCode::ConfigError, std::string(to_string(kind)) + " does not support " + what);
}

void protocol_panel(Report& rep, std::span<const MeasurementRecord* const> recs) {
  if (rep.options.group_by && *rep.options.group_by != GroupBy::Protocol) bad_option(rep.kind, "that group_by");
  ProtocolDistribution total;
  std::array<double, kObservedProtocolCount> fraction_sum{};
  long long with_data = 0;
  for (const auto* r : recs) {
    for (size_t i = 0; i < kObservedProtocolCount; ++i) total.counts[i] += r->distribution.counts[i];
    if (r->distribution.total() > 0) {
      ++with_data;
      for (size_t i = 0; i < kObservedProtocolCount; ++i) fraction_sum[i] += r->distribution.fractions[i];
    }
  }
  total.normalize();
  rep.columns = {"protocol", "count", "fraction", "mean_record_fraction"};
  for (size_t i = 0; i < kObservedProtocolCount; ++i) {
    if (total.counts[i] == 0) continue;
    rep.rows.push_back({std::string(to_string(static_cast<ObservedProtocol>(i))), total.counts[i], total.fractions[i],
                        fraction_sum[i] / static_cast<double>(with_data)});
  }
  rep.summary["total"] = total.total();
}

void cdn_table(Report& rep, std::span<const MeasurementRecord* const> recs) {
  if (rep.options.group_by && *rep.options.group_by != GroupBy::Provider) bad_option(rep.kind, "that group_by");
  std::map<std::string, long long> counts;
  long long total = 0;
  for (const auto* r : recs) {
    for (const auto& [p, n] : r->per_provider) {
      counts[p] += n;
      total += n;
    }
  }
  std::vector<std::pair<std::string, long long>> sorted(counts.begin(), counts.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  rep.columns = {"provider", "count", "share", "mean_per_record"};
  for (const auto& [p, n] : sorted) {
    if (n == 0) continue;
    rep.rows.push_back({p, n, static_cast<double>(n) / static_cast<double>(total),
                        static_cast<double>(n) / static_cast<double>(recs.size())});
  }
  rep.summary["total"] = total;
}

void geo_panel(Report& rep, std::span<const MeasurementRecord* const> recs) {
  GroupBy by = rep.options.group_by.value_or(GroupBy::Country);
  if (by != GroupBy::Continent && by != GroupBy::Country && by != GroupBy::City) bad_option(rep.kind, "that group_by");

  using Key = std::tuple<std::string, std::string, std::string>;
  struct Group {
    long long weight = 0;
    std::map<std::string, long long> providers, protocols;
    std::optional<LatLon> coordinates;
  };
  std::map<Key, Group> groups;
  long long unlocated = 0, resources = 0;
  for (const auto* r : recs) {
    unlocated += r->unattributed_count;
    resources += r->stats.resource_count;
    for (const auto& loc : r->per_location) {
      Key key{loc.continent ? std::string(to_string(*loc.continent)) : "",
              by != GroupBy::Continent ? loc.country.value_or("") : "", by == GroupBy::City ? loc.city.value_or("") : ""};
      auto& g = groups[key];
      g.weight += loc.count;
      for (const auto& [p, n] : loc.per_provider) g.providers[p] += n;
      for (const auto& [p, n] : loc.per_protocol) g.protocols[p] += n;
      if (by == GroupBy::City && !g.coordinates && loc.coordinates) g.coordinates = loc.coordinates;
    }
  }

  struct Row {
    Key key;
    Group group;
    LatLon at;
  };
  std::vector<Row> rows;
  long long total = 0;
  for (auto& [key, g] : groups) {
    if (g.weight == 0) continue;
    total += g.weight;
    const auto& [continent, country, city] = key;
    LatLon at{};
    if (g.coordinates) {
      at = *g.coordinates;
    } else if (const CountryInfo* info = country.empty() ? nullptr : find_country(country)) {
      at = info->centroid;
    } else if (auto c = continent_from_string(continent)) {
      at = continent_centroid(*c);
    }
    rows.push_back({key, std::move(g), at});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.group.weight > b.group.weight; });

  auto nullable = [](const std::string& s) { return s.empty() ? json(nullptr) : json(s); };
  rep.columns = {"continent", "country", "city", "lat", "lon", "weight", "providers", "protocols"};
  for (const auto& row : rows) {
    const auto& [continent, country, city] = row.key;
    rep.rows.push_back({nullable(continent), nullable(country), nullable(city), row.at.lat, row.at.lon,
                        row.group.weight, json(row.group.providers), json(row.group.protocols)});
  }
  rep.summary["total"] = total;
  rep.summary["unlocated"] = unlocated;
  rep.summary["resources"] = resources;
}

std::vector<std::string> count_groups(const MeasurementRecord& r, GroupBy by, std::vector<long long>& counts) {
  std::vector<std::string> names;
  auto take = [&](const std::map<std::string, long long>& m) {
    for (const auto& [k, n] : m) {
      names.push_back(k);
      counts.push_back(n);
    }
  };
  switch (by) {
    case GroupBy::Continent: take(r.per_continent); break;
    case GroupBy::Provider: take(r.per_provider); break;
    case GroupBy::Protocol:
      for (size_t i = 0; i < kObservedProtocolCount; ++i) {
        names.emplace_back(to_string(static_cast<ObservedProtocol>(i)));
        counts.push_back(r.distribution.counts[i]);
      }
      break;
    default: break;
  }
  return names;
}

void timeseries(Report& rep, std::span<const MeasurementRecord* const> recs, const QueryFilter& filter) {
  using namespace std::chrono;
  const Metric metric = rep.options.metric.value_or(Metric::Count);
  const GroupBy by = rep.options.group_by.value_or(GroupBy::Continent);
  if (metric == Metric::Count && by != GroupBy::Continent && by != GroupBy::Provider && by != GroupBy::Protocol) {
    bad_option(rep.kind, "that group_by");
  }
  const auto bucket = duration_cast<microseconds>(rep.options.bucket);
  if (bucket.count() <= 0) bad_option(rep.kind, "a non-positive bucket");

  auto bucket_of = [&](Timestamp t) {
    auto since = t.time_since_epoch();
    auto index = since.count() >= 0 ? since / bucket : (since - bucket + microseconds(1)) / bucket;
    return Timestamp{bucket * index};
  };

  // Selection window: the filter's range where given, else the data span.
  std::optional<Timestamp> first, last;
  for (const auto* r : recs) {
    if (!first || r->timestamp < *first) first = r->timestamp;
    if (!last || r->timestamp > *last) last = r->timestamp;
  }
  Timestamp win_from = *first, win_to = *last + milliseconds(1);
  if (filter.time_range && filter.time_range->from) win_from = *filter.time_range->from;
  if (filter.time_range && filter.time_range->to) win_to = *filter.time_range->to;
  auto partial = [&](Timestamp start) { return win_from > start || win_to < start + bucket; };

  std::map<Timestamp, std::vector<const MeasurementRecord*>> buckets;
  for (const auto* r : recs) buckets[bucket_of(r->timestamp)].push_back(r);

  if (metric == Metric::Count) {
    rep.columns = {"bucket_start", "group", "records", "total", "mean_per_record", "partial"};
    for (const auto& [start, members] : buckets) {
      std::map<std::string, long long> totals;
      for (const auto* r : members) {
        std::vector<long long> counts;
        auto names = count_groups(*r, by, counts);
        for (size_t i = 0; i < names.size(); ++i) totals[names[i]] += counts[i];
      }
      for (const auto& [group, n] : totals) {
        if (n == 0) continue;
        rep.rows.push_back({format_iso8601(start, 3), group, static_cast<long long>(members.size()), n,
                            static_cast<double>(n) / static_cast<double>(members.size()), partial(start)});
      }
    }
  } else {
    rep.columns = {"bucket_start", "records", "mean", "median", "p90", "partial"};
    for (const auto& [start, members] : buckets) {
      std::vector<double> values;
      for (const auto* r : members) {
        if (r->status != SessionStatus::Complete) continue;
        if (auto v = metric_value(*r, metric)) values.push_back(*v);
      }
      if (values.empty()) continue;
      Summary s = summarize(std::move(values));
      rep.rows.push_back({format_iso8601(start, 3), s.n, s.mean, s.median, s.p90, partial(start)});
    }
  }
  rep.summary["bucket_seconds"] = static_cast<long long>(rep.options.bucket.count());
}

void compare(Report& rep, std::span<const MeasurementRecord* const> recs) {
  const Metric metric = rep.options.metric.value_or(Metric::Plt);
  if (rep.options.group_by) bad_option(rep.kind, "group_by");
  std::map<std::string, std::vector<double>> groups;
  for (const auto* r : recs) {
    if (r->status != SessionStatus::Complete) continue;
    auto v = metric_value(*r, metric);
    if (!v) continue;
    std::string key = rep.options.compare == CompareDimension::Browser ? r->browser.name
                                                                       : std::string(to_string(r->requested_protocol));
    groups[key].push_back(*v);
  }
  std::map<std::string, Summary> summaries;
  for (auto& [k, v] : groups) summaries[k] = summarize(std::move(v));

  std::optional<double> base;
  if (rep.options.baseline) {
    auto it = summaries.find(*rep.options.baseline);
    if (it == summaries.end() && !summaries.empty()) {
      throw Error(ErrorCode::ConfigError, "baseline group '" + *rep.options.baseline + "' has no data");
    }
    if (it != summaries.end()) base = it->second.mean;
  } else if (!summaries.empty()) {
    base = summaries.begin()->second.mean;
  }
  rep.columns = {"group", "records", "mean", "median", "p90", "delta_mean"};
  for (const auto& [k, s] : summaries) rep.rows.push_back({k, s.n, s.mean, s.median, s.p90, s.mean - *base});
}

}  // namespace

Report aggregate(std::span<const MeasurementRecord> records, ReportKind kind, const QueryFilter& filter,
                 const ReportOptions& options, std::optional<Timestamp> generated_at) {
  Report rep;
  rep.kind = kind;
  rep.filters = filter.describe();
  rep.options = options;
  rep.generated_at = truncate_to_millis(generated_at.value_or(
      std::chrono::time_point_cast<std::chrono::microseconds>(std::chrono::system_clock::now())));

  std::vector<const MeasurementRecord*> selected;
  for (const auto& r : records) {
    if (filter.matches(r)) selected.push_back(&r);
  }
  rep.summary["record_count"] = static_cast<long long>(selected.size());

  if (!selected.empty()) {
    switch (kind) {
      case ReportKind::ProtocolPanel: protocol_panel(rep, selected); break;
      case ReportKind::CdnTable: cdn_table(rep, selected); break;
      case ReportKind::GeoPanel: geo_panel(rep, selected); break;
      case ReportKind::Timeseries: timeseries(rep, selected, filter); break;
      case ReportKind::Compare: compare(rep, selected); break;
    }
  } else {
    // Column layout of an empty report still follows the kind.
    std::vector<MeasurementRecord> none;
    switch (kind) {
      case ReportKind::ProtocolPanel: rep.columns = {"protocol", "count", "fraction", "mean_record_fraction"}; break;
      case ReportKind::CdnTable: rep.columns = {"provider", "count", "share", "mean_per_record"}; break;
      case ReportKind::GeoPanel:
        rep.columns = {"continent", "country", "city", "lat", "lon", "weight", "providers", "protocols"};
        break;
      case ReportKind::Timeseries:
        rep.columns = options.metric.value_or(Metric::Count) == Metric::Count
                          ? std::vector<std::string>{"bucket_start", "group", "records", "total", "mean_per_record",
                                                     "partial"}
                          : std::vector<std::string>{"bucket_start", "records", "mean", "median", "p90", "partial"};
        break;
      case ReportKind::Compare: rep.columns = {"group", "records", "mean", "median", "p90", "delta_mean"}; break;
    }
    rep.summary["total"] = 0;
  }
  rep.empty = rep.rows.empty();
  return rep;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

json options_to_json(const ReportOptions& o) {
  json j = json::object();
  j["group_by"] = o.group_by ? json(to_string(*o.group_by)) : json(nullptr);
  j["metric"] = o.metric ? json(to_string(*o.metric)) : json(nullptr);
  j["bucket_seconds"] = static_cast<long long>(o.bucket.count());
  j["compare"] = to_string(o.compare);
  j["baseline"] = o.baseline ? json(*o.baseline) : json(nullptr);
  return j;
}

ReportOptions options_from_json(const json& j) {
  ReportOptions o;
  if (!j.at("group_by").is_null()) o.group_by = group_by_from_string(j["group_by"].get<std::string>());
  if (!j.at("metric").is_null()) o.metric = metric_from_string(j["metric"].get<std::string>());
  o.bucket = std::chrono::seconds(j.at("bucket_seconds").get<long long>());
  o.compare = compare_dimension_from_string(j.at("compare").get<std::string>()).value_or(CompareDimension::Browser);
  if (!j.at("baseline").is_null()) o.baseline = j["baseline"].get<std::string>();
  return o;
}

std::string cell_text(const json& cell) {
  if (cell.is_null()) return {};
  if (cell.is_string()) return cell.get<std::string>();
  return cell.dump();
}

std::string html_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string render_geojson(const Report& rep) {
  json features = json::array();
  size_t lat = rep.column("lat"), lon = rep.column("lon");
  for (const auto& row : rep.rows) {
    json props = json::object();
    for (size_t i = 0; i < rep.columns.size(); ++i) {
      if (i == lat || i == lon) continue;
      props[rep.columns[i]] = row[i];
    }
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Point"}, {"coordinates", {row[lon], row[lat]}}}},
                        {"properties", props}});
  }
  return json{{"type", "FeatureCollection"}, {"features", features}}.dump(2) + "\n";
}

std::string render_html(const Report& rep) {
  std::string payload = report_to_json(rep).dump();
  // No '<' may reach the script element, or markup in values could end it.
  for (size_t at = payload.find('<'); at != std::string::npos; at = payload.find('<', at + 6)) {
    payload.replace(at, 1, "\\u003c");
  }
  std::string title = "pageprobe report: " + std::string(to_string(rep.kind));
  std::string out;
  out += "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>" + html_escape(title) +
         "</title>\n<style>\nbody{font-family:sans-serif;margin:2em}table{border-collapse:collapse}"
         "th,td{border:1px solid #999;padding:4px 8px;text-align:left}th{background:#eee}\n</style>\n</head>\n<body>\n";
  out += "<h1>" + html_escape(title) + "</h1>\n";
  out += "<p>Generated " + html_escape(format_iso8601(rep.generated_at, 3)) + "</p>\n";
  if (!rep.filters.empty()) {
    out += "<ul class=\"filters\">\n";
    for (const auto& [k, v] : rep.filters) out += "<li>" + html_escape(k) + " = " + html_escape(v) + "</li>\n";
    out += "</ul>\n";
  }
  if (rep.empty) out += "<p class=\"empty\">No measurements match the selected filters.</p>\n";
  out += "<table>\n<thead><tr>";
  for (const auto& c : rep.columns) out += "<th>" + html_escape(c) + "</th>";
  out += "</tr></thead>\n<tbody>\n";
  for (const auto& row : rep.rows) {
    out += "<tr>";
    for (const auto& cell : row) out += "<td>" + html_escape(cell_text(cell)) + "</td>";
    out += "</tr>\n";
  }
  out += "</tbody>\n</table>\n";
  out += "<script type=\"application/json\" id=\"report-data\">" + payload + "</script>\n</body>\n</html>\n";
  return out;
}

}  // namespace

json report_to_json(const Report& rep) {
  json filters = json::object();
  for (const auto& [k, v] : rep.filters) filters[k] = v;
  json rows = json::array();
  for (const auto& row : rep.rows) rows.push_back(row);
  return {{"kind", to_string(rep.kind)},
          {"filters", filters},
          {"options", options_to_json(rep.options)},
          {"columns", rep.columns},
          {"rows", rows},
          {"empty", rep.empty},
          {"summary", rep.summary},
          {"generated_at", format_iso8601(rep.generated_at, 3)}};
}

Report report_from_json(std::string_view text) {
  json j = json::parse(text.begin(), text.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::MalformedDocument, "report is not a JSON object");
  try {
    Report rep;
    auto kind = report_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::MalformedDocument, "unknown report kind");
    rep.kind = *kind;
    for (const auto& [k, v] : j.at("filters").items()) rep.filters.emplace_back(k, v.get<std::string>());
    // Filters are echoed in canonical key order.
    std::vector<std::pair<std::string, std::string>> ordered;
    for (const auto& key : QueryFilter::keys()) {
      for (const auto& f : rep.filters) {
        if (f.first == key) ordered.push_back(f);
      }
    }
    rep.filters = std::move(ordered);
    rep.options = options_from_json(j.at("options"));
    rep.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& row : j.at("rows")) rep.rows.push_back(row.get<std::vector<json>>());
    rep.empty = j.at("empty").get<bool>();
    rep.summary = j.at("summary");
    auto ts = parse_iso8601(j.at("generated_at").get<std::string>());
    if (!ts) throw Error(ErrorCode::MalformedDocument, "bad generated_at");
    rep.generated_at = *ts;
    return rep;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedDocument, e.what());
  }
}

std::string render(const Report& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::Json: return report_to_json(report).dump(2) + "\n";
    case ReportFormat::Csv: {
      std::string out = csv_row(report.columns);
      for (const auto& row : report.rows) {
        std::vector<std::string> cells;
        for (const auto& c : row) cells.push_back(cell_text(c));
        out += csv_row(cells);
      }
      return out;
    }
    case ReportFormat::GeoJson:
      if (report.kind != ReportKind::GeoPanel) {
        throw Error(ErrorCode::FormatMismatch, "geojson needs a geo_panel report, got " +
                                                   std::string(to_string(report.kind)));
      }
      return render_geojson(report);
    case ReportFormat::Html: return render_html(report);
  }
  return {};
}

}  // namespace pageprobe
