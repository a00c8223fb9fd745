#include <doctest.h>

#include <json.hpp>

#include "../support/fixtures.hpp"
#include "../support/generators.hpp"
#include "pageprobe/error.hpp"
#include "pageprobe/probe.hpp"
#include "pageprobe/report.hpp"

using namespace pageprobe;
using nlohmann::json;

namespace {

// Analyzes a fixture capture the way the replay driver would serve it.
MeasurementRecord fixture_record(const std::string& name, const std::string& url) {
  testsupport::FixtureTables t(name);
  ReplayDriver replay(testsupport::fixture_path(name));
  NavigationResult nav = replay.navigate(url, std::chrono::milliseconds(18000), {});
  HarSession s = parse_har(nav.har);
  std::optional<std::span<const PaintEvent>> paints;
  if (!nav.paint_events.empty()) paints = std::span<const PaintEvent>(nav.paint_events);
  MeasurementRecord r = analyze_session(s, t.config.session, paints, t.context());
  r.url = url;
  return r;
}

std::map<std::string, long long> column_counts(const Report& rep, const std::string& key, const std::string& value) {
  std::map<std::string, long long> out;
  for (const auto& row : rep.rows) out[row[rep.column(key)].get<std::string>()] = row[rep.column(value)].get<long long>();
  return out;
}

Report run(std::span<const MeasurementRecord> records, ReportKind kind, ReportOptions opts = {},
           std::vector<std::pair<std::string, std::string>> filters = {}) {
  return aggregate(records, kind, QueryFilter::parse(filters), opts, Timestamp{std::chrono::seconds(1'570'000'000)});
}

MeasurementRecord timed_record(long long minute, double plt, const std::string& browser,
                               SessionStatus status = SessionStatus::Complete) {
  MeasurementRecord r;
  r.timestamp = Timestamp{std::chrono::seconds(1'560'000'000) + std::chrono::minutes(minute)};
  r.timings.page_load_time_ms = plt;
  r.browser.name = browser;
  r.status = status;
  return r;
}

}  // namespace

TEST_SUITE("report") {
  TEST_CASE("cdn table of the French news homepage") {
    std::vector<MeasurementRecord> recs = {fixture_record("lefigaro", "https://www.lefigaro.fr/")};
    Report rep = run(recs, ReportKind::CdnTable);
    CHECK(column_counts(rep, "provider", "count") == std::map<std::string, long long>{{"Akamai", 60},
                                                                                        {"Amazon", 2},
                                                                                        {"Cdn77", 1},
                                                                                        {"Fastly", 25},
                                                                                        {"Google", 7},
                                                                                        {"KeyCdn", 1},
                                                                                        {"No CDN", 55}});
    CHECK(rep.rows.front()[rep.column("provider")] == "Akamai");
    CHECK(rep.summary["total"] == 151);
    CHECK_FALSE(rep.empty);
  }

  TEST_CASE("geo panel: continents of the Chinese portal") {
    std::vector<MeasurementRecord> recs = {fixture_record("csdn", "https://www.csdn.net/")};
    ReportOptions o;
    o.group_by = GroupBy::Continent;
    Report rep = run(recs, ReportKind::GeoPanel, o);
    CHECK(column_counts(rep, "continent", "weight") ==
          std::map<std::string, long long>{{"AS", 50}, {"EU", 81}, {"NA", 2}});
    for (const auto& row : rep.rows) {
      CHECK(row[rep.column("lat")].is_number());
      CHECK(row[rep.column("lon")].is_number());
    }
    const auto& eu = *std::find_if(rep.rows.begin(), rep.rows.end(),
                                   [&](const auto& row) { return row[rep.column("continent")] == "EU"; });
    CHECK(eu[rep.column("providers")]["Level 3"] == 81);
    CHECK(eu[rep.column("protocols")]["H2"] == 81);
  }

  TEST_CASE("protocol panel fractions") {
    std::vector<MeasurementRecord> recs = {fixture_record("csdn", "https://www.csdn.net/")};
    Report rep = run(recs, ReportKind::ProtocolPanel);
    std::map<std::string, double> fractions;
    for (const auto& row : rep.rows) {
      fractions[row[rep.column("protocol")].get<std::string>()] = row[rep.column("fraction")].get<double>();
    }
    CHECK(fractions.size() == 2);
    CHECK(fractions["H2"] == doctest::Approx(84.0 / 133));
    CHECK(fractions["H1"] == doctest::Approx(49.0 / 133));

    std::vector<MeasurementRecord> yt = {fixture_record("youtube", "https://www.youtube.com/")};
    Report q = run(yt, ReportKind::ProtocolPanel);
    CHECK(q.summary["total"] == 56);
    for (const auto& row : q.rows) {
      if (row[q.column("protocol")] == "QUIC") CHECK(row[q.column("count")] == 25);
    }
  }

  TEST_CASE("totals are conserved under random filters") {
    testsupport::Rng rng(606);
    std::vector<MeasurementRecord> recs;
    for (int i = 0; i < 300; ++i) recs.push_back(testsupport::random_record(rng));
    const std::vector<std::pair<std::string, std::string>> pool = {
        {"probe_location", "FR"}, {"adblock", "true"},  {"browser", "Chrome"},
        {"access_network", "ADSL"}, {"provider", "Akamai"}, {"requested_protocol", "QUIC"},
        {"time_range", "2019-03-01T00:00:00Z..2020-03-01T00:00:00Z"}};
    for (int i = 0; i < 60; ++i) {
      std::vector<std::pair<std::string, std::string>> filters;
      for (const auto& f : pool) {
        if (testsupport::coin(rng, 0.25)) filters.push_back(f);
      }
      QueryFilter qf = QueryFilter::parse(filters);
      long long resources = 0, protocols = 0, records = 0;
      for (const auto& r : recs) {
        if (!qf.matches(r)) continue;
        ++records;
        resources += r.stats.resource_count;
        protocols += r.distribution.total();
      }
      Report cdn = run(recs, ReportKind::CdnTable, {}, filters);
      long long cdn_sum = 0;
      for (const auto& row : cdn.rows) cdn_sum += row[cdn.column("count")].get<long long>();
      CHECK(cdn_sum == resources);
      CHECK(cdn.summary["total"] == resources);
      CHECK(cdn.summary["record_count"] == records);

      for (auto by : {GroupBy::Continent, GroupBy::Country, GroupBy::City}) {
        ReportOptions o;
        o.group_by = by;
        Report geo = run(recs, ReportKind::GeoPanel, o, filters);
        long long weight = 0;
        for (const auto& row : geo.rows) weight += row[geo.column("weight")].get<long long>();
        CHECK(weight == geo.summary["total"].get<long long>());
        CHECK(weight + geo.summary["unlocated"].get<long long>() == resources);
      }

      Report proto = run(recs, ReportKind::ProtocolPanel, {}, filters);
      long long proto_sum = 0;
      double fraction_sum = 0;
      for (const auto& row : proto.rows) {
        proto_sum += row[proto.column("count")].get<long long>();
        fraction_sum += row[proto.column("fraction")].get<double>();
      }
      CHECK(proto_sum == protocols);
      if (protocols) CHECK(fraction_sum == doctest::Approx(1.0));
    }
  }

  TEST_CASE("timing timeseries: complete sessions only, nearest-rank p90") {
    std::vector<MeasurementRecord> recs = {timed_record(0, 300, "Chrome"), timed_record(10, 100, "Chrome"),
                                           timed_record(20, 200, "Chrome"),
                                           timed_record(30, 9000, "Chrome", SessionStatus::Timeout),
                                           timed_record(70, 500, "Chrome")};
    ReportOptions o;
    o.metric = Metric::Plt;
    o.bucket = std::chrono::hours(1);
    Report rep = run(recs, ReportKind::Timeseries, o);
    REQUIRE(rep.rows.size() == 2);
    const auto& first = rep.rows[0];
    CHECK(first[rep.column("records")] == 3);
    CHECK(first[rep.column("mean")].get<double>() == doctest::Approx(200));
    CHECK(first[rep.column("median")].get<double>() == doctest::Approx(200));
    CHECK(first[rep.column("p90")].get<double>() == doctest::Approx(300));
    CHECK(rep.rows[1][rep.column("median")].get<double>() == doctest::Approx(500));
  }

  TEST_CASE("count timeseries groups by continent per bucket") {
    testsupport::Rng rng(77);
    std::vector<MeasurementRecord> recs;
    for (int i = 0; i < 100; ++i) recs.push_back(testsupport::random_record(rng));
    ReportOptions o;
    o.bucket = std::chrono::hours(24 * 30);
    Report rep = run(recs, ReportKind::Timeseries, o);
    long long total = 0, expected = 0;
    for (const auto& row : rep.rows) total += row[rep.column("total")].get<long long>();
    for (const auto& r : recs) {
      for (const auto& [_, n] : r.per_continent) expected += n;
    }
    CHECK(total == expected);
    ReportOptions bad = o;
    bad.group_by = GroupBy::City;
    CHECK_THROWS_AS(run(recs, ReportKind::Timeseries, bad), Error);
  }

  TEST_CASE("compare reports deltas against the baseline") {
    std::vector<MeasurementRecord> recs = {timed_record(0, 1000, "Chrome"), timed_record(1, 1200, "Chrome"),
                                           timed_record(2, 1500, "Firefox"), timed_record(3, 1700, "Firefox")};
    Report rep = run(recs, ReportKind::Compare);
    REQUIRE(rep.rows.size() == 2);
    CHECK(rep.rows[0][rep.column("group")] == "Chrome");
    CHECK(rep.rows[0][rep.column("delta_mean")].get<double>() == doctest::Approx(0));
    CHECK(rep.rows[1][rep.column("delta_mean")].get<double>() == doctest::Approx(500));
    ReportOptions o;
    o.baseline = "Firefox";
    Report against = run(recs, ReportKind::Compare, o);
    CHECK(against.rows[0][against.column("delta_mean")].get<double>() == doctest::Approx(-500));
    o.baseline = "Safari";
    CHECK_THROWS_AS(run(recs, ReportKind::Compare, o), Error);
  }

  TEST_CASE("an empty selection is an empty report, not an error") {
    std::vector<MeasurementRecord> recs = {fixture_record("cachechain", "https://www.example.com/")};
    for (auto kind : {ReportKind::ProtocolPanel, ReportKind::GeoPanel, ReportKind::CdnTable, ReportKind::Timeseries,
                      ReportKind::Compare}) {
      Report rep = run(recs, kind, {}, {{"website", "nothing.test"}});
      CHECK(rep.empty);
      CHECK(rep.rows.empty());
      CHECK_FALSE(rep.columns.empty());
      CHECK(rep.summary["total"] == 0);
      for (auto f : {ReportFormat::Json, ReportFormat::Csv, ReportFormat::Html}) CHECK_NOTHROW(render(rep, f));
    }
    CHECK(run({}, ReportKind::CdnTable).empty);
  }

  TEST_CASE("options that do not apply are rejected") {
    std::vector<MeasurementRecord> recs = {fixture_record("cachechain", "https://www.example.com/")};
    ReportOptions o;
    o.group_by = GroupBy::Protocol;
    CHECK_THROWS_AS(run(recs, ReportKind::GeoPanel, o), Error);
    o.group_by = GroupBy::City;
    CHECK_THROWS_AS(run(recs, ReportKind::Compare, o), Error);
  }

  TEST_CASE("GeoJSON points carry longitude first") {
    std::vector<MeasurementRecord> recs = {fixture_record("cachechain", "https://www.example.com/")};
    ReportOptions o;
    o.group_by = GroupBy::Country;
    Report rep = run(recs, ReportKind::GeoPanel, o);
    json doc = json::parse(render(rep, ReportFormat::GeoJson));
    CHECK(doc["type"] == "FeatureCollection");
    REQUIRE(doc["features"].size() == rep.rows.size());
    const auto& f = doc["features"][0];
    CHECK(f["geometry"]["type"] == "Point");
    CHECK(f["geometry"]["coordinates"][0] == rep.rows[0][rep.column("lon")]);
    CHECK(f["geometry"]["coordinates"][1] == rep.rows[0][rep.column("lat")]);
    CHECK(f["properties"]["country"] == "US");

    Report cdn = run(recs, ReportKind::CdnTable);
    try {
      render(cdn, ReportFormat::GeoJson);
      FAIL("expected FormatMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::FormatMismatch);
    }
  }

  TEST_CASE("CSV and HTML renderings") {
    std::vector<MeasurementRecord> recs = {fixture_record("lefigaro", "https://www.lefigaro.fr/")};
    Report rep = run(recs, ReportKind::CdnTable, {}, {{"probe_location", "Curepipe"}});
    std::string csv = render(rep, ReportFormat::Csv);
    CHECK(csv.rfind("provider,count,share,mean_per_record\r\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(rep.rows.size() + 1));
    CHECK(csv.find("\"No CDN\"") == std::string::npos);

    std::string html = render(rep, ReportFormat::Html);
    CHECK(html.find("<td>Akamai</td>") != std::string::npos);
    CHECK(html.find("probe_location = Curepipe") != std::string::npos);
    size_t open = html.find("id=\"report-data\">");
    REQUIRE(open != std::string::npos);
    open += 17;
    size_t close = html.find("</script>", open);
    json embedded = json::parse(html.substr(open, close - open));
    CHECK(report_from_json(embedded.dump()) == rep);
  }

  TEST_CASE("markup in values is escaped") {
    Report rep;
    rep.kind = ReportKind::CdnTable;
    rep.columns = {"provider", "count", "share", "mean_per_record"};
    rep.rows = {{"<script>alert(1)</script>", 1, 1.0, 1.0}};
    rep.empty = false;
    std::string html = render(rep, ReportFormat::Html);
    CHECK(html.find("<script>alert") == std::string::npos);
    CHECK(html.find("&lt;script&gt;") != std::string::npos);
    size_t open = html.find("id=\"report-data\">") + 17;
    size_t close = html.find("</script>", open);
    CHECK(report_from_json(html.substr(open, close - open)) == rep);
  }

  TEST_CASE("JSON round trip") {
    testsupport::Rng rng(9);
    std::vector<MeasurementRecord> recs;
    for (int i = 0; i < 50; ++i) recs.push_back(testsupport::random_record(rng));
    ReportOptions ts;
    ts.metric = Metric::Tfvr;
    ts.bucket = std::chrono::hours(24 * 7);
    ReportOptions cmp;
    cmp.compare = CompareDimension::RequestedProtocol;
    cmp.metric = Metric::Processing;
    std::vector<std::pair<ReportKind, ReportOptions>> cases = {
        {ReportKind::CdnTable, {}}, {ReportKind::GeoPanel, {}}, {ReportKind::ProtocolPanel, {}},
        {ReportKind::Timeseries, ts}, {ReportKind::Compare, cmp}};
    for (const auto& [kind, opts] : cases) {
      Report rep = run(recs, kind, opts, {{"adblock", "false"}, {"probe_location", "FR"}});
      CHECK(report_from_json(render(rep, ReportFormat::Json)) == rep);
    }
    CHECK_THROWS_AS(report_from_json("[]"), Error);
    CHECK_THROWS_AS(report_from_json("{\"kind\": \"pie\"}"), Error);
  }

  TEST_CASE("enum names read back case-insensitively") {
    CHECK(report_kind_from_string("CDN_TABLE") == ReportKind::CdnTable);
    CHECK(group_by_from_string("City") == GroupBy::City);
    CHECK(metric_from_string("tfvr") == Metric::Tfvr);
    CHECK(report_format_from_string("GeoJSON") == ReportFormat::GeoJson);
    CHECK_FALSE(report_kind_from_string("pie").has_value());
  }
}
