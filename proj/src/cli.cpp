#include "pageprobe/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pageprobe/chrome.hpp"
#include "pageprobe/error.hpp"
#include "pageprobe/probe.hpp"
#include "pageprobe/report.hpp"
#include "pageprobe/store.hpp"

namespace pageprobe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::StoreCorrupt:
    case ErrorCode::StoreFailure:
    case ErrorCode::DriverFailure:
    case ErrorCode::WhoisUnavailable:
    case ErrorCode::ResolverFailure:
      return kExitFailure;
    default:
      return kExitUsage;
  }
}

// Lookup tables for offline enrichment: whois.tsv, geo.tsv, ns.tsv and an
// optional provider_map.tsv, each optional.
struct Enrichment {
  std::unique_ptr<WhoisClient> whois;
  std::unique_ptr<GeoProvider> geo;
  std::unique_ptr<NsResolver> dns;
  std::optional<ProviderMap> provider_map;
  ProviderCache cache;

  DeliveryContext context() {
    DeliveryContext ctx;
    ctx.whois = whois.get();
    ctx.geo = geo.get();
    ctx.dns = dns.get();
    if (provider_map) ctx.provider_map = &*provider_map;
    ctx.provider_cache = &cache;
    return ctx;
  }
};

void load_fixtures(Enrichment& e, const std::string& dir) {
  if (!fs::is_directory(dir)) throw UsageError("fixtures directory not found: " + dir);
  auto file = [&](const char* name) -> std::optional<std::string> {
    fs::path p = fs::path(dir) / name;
    if (fs::exists(p)) return p.string();
    return std::nullopt;
  };
  if (auto p = file("whois.tsv")) e.whois = std::make_unique<TableWhois>(TableWhois::from_file(*p));
  if (auto p = file("geo.tsv")) e.geo = std::make_unique<TableGeo>(TableGeo::from_file(*p));
  if (auto p = file("ns.tsv")) e.dns = std::make_unique<TableNsResolver>(TableNsResolver::from_file(*p));
  if (auto p = file("provider_map.tsv")) e.provider_map = ProviderMap::from_file(*p);
}

QueryFilter parse_filters(const std::vector<std::string>& raw) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& r : raw) pairs.push_back(QueryFilter::split_pair(r));
  return QueryFilter::parse(pairs);
}

std::vector<PaintEvent> read_paint_file(const fs::path& path) {
  json events = json::parse(read_file(path.string()), nullptr, false);
  if (!events.is_array()) throw UsageError("bad paint file " + path.string());
  std::vector<PaintEvent> out;
  for (const auto& ev : events) out.push_back({ev.value("name", ""), ev.value("offset_ms", 0.0)});
  return out;
}

std::vector<fs::path> har_inputs(const std::string& path) {
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".har") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::exists(path)) {
    files.emplace_back(path);
  } else {
    throw UsageError("no such HAR input: " + path);
  }
  if (files.empty()) throw UsageError("no .har files in " + path);
  return files;
}

std::chrono::seconds parse_bucket(const std::string& text) {
  if (text.empty()) throw UsageError("empty bucket");
  size_t used = 0;
  long long n = 0;
  try {
    n = std::stoll(text, &used);
  } catch (const std::exception&) {
    throw UsageError("bad bucket '" + text + "'");
  }
  std::string unit = text.substr(used);
  long long scale = unit.empty() || unit == "s" ? 1 : unit == "m" ? 60 : unit == "h" ? 3600 : unit == "d" ? 86400 : 0;
  if (scale == 0 || n <= 0) throw UsageError("bad bucket '" + text + "'");
  return std::chrono::seconds(n * scale);
}

void write_output(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty() || out_path == "-") {
    out << text;
    return;
  }
  std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
  if (!f) throw UsageError("cannot write " + out_path);
  f << text;
  if (!f.flush()) throw UsageError("cannot write " + out_path);
}

// ---------------------------------------------------------------------------
// Subcommands

struct MeasureArgs {
  std::string config, driver = "live", store, fixtures, chrome = "chromium", extension;
};

int cmd_measure(const MeasureArgs& a, std::ostream& out, std::ostream& err) {
  CampaignConfig campaign = load_campaign_config(a.config);
  Enrichment enrichment;
  if (!a.fixtures.empty()) {
    load_fixtures(enrichment, a.fixtures);
  } else {
    enrichment.whois = std::make_unique<UnavailableWhois>();
    enrichment.dns = std::make_unique<SystemNsResolver>();
  }

  DriverFactory factory;
  if (a.driver.rfind("replay:", 0) == 0) {
    std::string dir = a.driver.substr(7);
    if (!fs::is_directory(dir)) throw UsageError("replay directory not found: " + dir);
    factory = [dir](const std::string&) { return std::make_shared<ReplayDriver>(dir); };
  } else if (a.driver == "live") {
    ChromeOptions options;
    options.binary = a.chrome;
    options.window = campaign.session.window;
    if (campaign.session.adblock) {
      if (a.extension.empty()) throw UsageError("adblock is set but no --adblock-extension was given");
      options.extension_dir = a.extension;
    }
    factory = [options](const std::string&) { return std::make_shared<ChromeDriver>(options); };
  } else {
    throw UsageError("--driver must be live or replay:<dir>");
  }

  RecordStore store(a.store);
  CampaignSummary summary = run_campaign(campaign.session, campaign.websites, factory, store, enrichment.context());
  err << "measured " << summary.total() << " sites: " << summary.complete << " complete, " << summary.timeout
      << " timeout, " << summary.failed << " failed\n";
  out << json{{"complete", summary.complete},
              {"timeout", summary.timeout},
              {"failed", summary.failed},
              {"record_ids", summary.record_ids}}
             .dump()
      << "\n";
  return kExitOk;
}

struct IngestArgs {
  std::string har, config, store, fixtures;
};

int cmd_ingest(const IngestArgs& a, std::ostream& out, std::ostream& err) {
  CampaignConfig campaign = load_campaign_config(a.config);
  Enrichment enrichment;
  if (!a.fixtures.empty()) load_fixtures(enrichment, a.fixtures);
  DeliveryContext ctx = enrichment.context();

  // Everything is analyzed before the first append, so a bad input leaves
  // the store untouched.
  std::vector<MeasurementRecord> records;
  for (const auto& file : har_inputs(a.har)) {
    HarSession session;
    try {
      session = parse_har(read_file(file.string()));
    } catch (const Error& e) {
      throw UsageError(file.string() + ": " + e.what());
    }
    std::optional<std::vector<PaintEvent>> paints;
    fs::path paint_file = file;
    paint_file.replace_extension(".paint.json");
    if (fs::exists(paint_file)) paints = read_paint_file(paint_file);
    std::optional<std::span<const PaintEvent>> view;
    if (paints) view = std::span<const PaintEvent>(*paints);
    MeasurementRecord r = analyze_session(session, campaign.session, view, ctx);
    r.status = SessionStatus::Complete;
    r.extra["source"] = file.filename().string();
    records.push_back(std::move(r));
  }

  RecordStore store(a.store);
  json ids = json::array();
  for (const auto& r : records) ids.push_back(store.append(r));
  err << "ingested " << records.size() << " capture(s) into " << a.store << "\n";
  out << json{{"record_ids", ids}}.dump() << "\n";
  return kExitOk;
}

struct ReportArgs {
  std::string store, kind, format = "json", out, group_by, metric, bucket, compare, baseline, generated_at;
  std::vector<std::string> filters;
};

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream&) {
  auto kind = report_kind_from_string(a.kind);
  if (!kind) throw UsageError("unknown report kind '" + a.kind + "'");
  auto format = report_format_from_string(a.format);
  if (!format) throw UsageError("unknown format '" + a.format + "'");
  ReportOptions options;
  if (!a.group_by.empty()) {
    options.group_by = group_by_from_string(a.group_by);
    if (!options.group_by) throw UsageError("unknown group-by '" + a.group_by + "'");
  }
  if (!a.metric.empty()) {
    options.metric = metric_from_string(a.metric);
    if (!options.metric) throw UsageError("unknown metric '" + a.metric + "'");
  }
  if (!a.bucket.empty()) options.bucket = parse_bucket(a.bucket);
  if (!a.compare.empty()) {
    auto d = compare_dimension_from_string(a.compare);
    if (!d) throw UsageError("unknown compare dimension '" + a.compare + "'");
    options.compare = *d;
  }
  if (!a.baseline.empty()) options.baseline = a.baseline;
  std::optional<Timestamp> generated_at;
  if (!a.generated_at.empty()) {
    generated_at = parse_iso8601(a.generated_at);
    if (!generated_at) throw UsageError("bad --generated-at '" + a.generated_at + "'");
  }

  QueryFilter filter = parse_filters(a.filters);
  RecordStore store(a.store);
  std::vector<MeasurementRecord> records = store.query(QueryFilter{});
  Report report = aggregate(records, *kind, filter, options, generated_at);
  write_output(render(report, *format), a.out, out);
  return kExitOk;
}

struct QueryArgs {
  std::string store, format = "json";
  std::vector<std::string> filters;
};

int cmd_query(const QueryArgs& a, std::ostream& out, std::ostream&) {
  if (a.format != "json" && a.format != "csv") throw UsageError("--format must be json or csv");
  QueryFilter filter = parse_filters(a.filters);
  RecordStore store(a.store);
  std::vector<MeasurementRecord> records = store.query(filter);
  if (a.format == "csv") {
    out << records_to_csv(records);
  } else {
    json arr = json::array();
    for (const auto& r : records) arr.push_back(to_json(r));
    out << arr.dump(2) << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Web page performance and content-delivery measurement"};
  app.name(args.empty() ? "pageprobe" : fs::path(args.front()).filename().string());
  app.require_subcommand(1);

  MeasureArgs measure;
  auto* m = app.add_subcommand("measure", "Run a measurement campaign and append the records to a store");
  m->add_option("--config", measure.config, "Campaign configuration (JSON)")->required();
  m->add_option("--driver", measure.driver, "live, or replay:<dir> of captured HAR files");
  m->add_option("--store", measure.store, "Record store file")->required();
  m->add_option("--fixtures", measure.fixtures, "Directory of whois/geo/ns lookup tables");
  m->add_option("--chrome", measure.chrome, "Browser binary for the live driver");
  m->add_option("--adblock-extension", measure.extension, "Unpacked ad-blocking extension for adblock campaigns");

  IngestArgs ingest;
  auto* i = app.add_subcommand("ingest", "Analyze pre-captured HAR files into records");
  i->add_option("--har", ingest.har, "HAR file or directory of .har files")->required();
  i->add_option("--config", ingest.config, "Session configuration (JSON)")->required();
  i->add_option("--store", ingest.store, "Record store file")->required();
  i->add_option("--fixtures", ingest.fixtures, "Directory of whois/geo/ns lookup tables");

  ReportArgs report;
  auto* r = app.add_subcommand("report", "Aggregate stored records into a report");
  r->add_option("--store", report.store, "Record store file")->required();
  r->add_option("--kind", report.kind, "protocol_panel, geo_panel, cdn_table, timeseries or compare")->required();
  r->add_option("--filter", report.filters, "key=value, repeatable");
  r->add_option("--format", report.format, "json, csv, geojson or html");
  r->add_option("--out", report.out, "Output file (standard output when absent)");
  r->add_option("--group-by", report.group_by, "protocol, provider, continent, country or city");
  r->add_option("--metric", report.metric, "count, plt, tfvr, fp or processing");
  r->add_option("--bucket", report.bucket, "Time bucket such as 3600, 6h or 1d");
  r->add_option("--compare", report.compare, "browser or requested_protocol");
  r->add_option("--baseline", report.baseline, "Group the compare deltas are taken against");
  r->add_option("--generated-at", report.generated_at, "Fixed generation timestamp (ISO 8601)");

  QueryArgs query;
  auto* q = app.add_subcommand("query", "Print stored records matching filters");
  q->add_option("--store", query.store, "Record store file")->required();
  q->add_option("--filter", query.filters, "key=value, repeatable");
  q->add_option("--format", query.format, "json or csv");

  std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << app.get_name() << ": " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (m->parsed()) return cmd_measure(measure, out, err);
    if (i->parsed()) return cmd_ingest(ingest, out, err);
    if (r->parsed()) return cmd_report(report, out, err);
    if (q->parsed()) return cmd_query(query, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace pageprobe
