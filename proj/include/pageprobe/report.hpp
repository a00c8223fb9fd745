#pragma once

#include <chrono>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pageprobe/record.hpp"
#include "pageprobe/store.hpp"

namespace pageprobe {

enum class ReportKind { ProtocolPanel, GeoPanel, CdnTable, Timeseries, Compare };
enum class GroupBy { Protocol, Provider, Continent, Country, City };
enum class Metric { Count, Plt, Tfvr, Fp, Processing };
enum class CompareDimension { Browser, RequestedProtocol };
enum class ReportFormat { Json, Csv, GeoJson, Html };

std::string_view to_string(ReportKind k);
std::string_view to_string(GroupBy g);
std::string_view to_string(Metric m);
std::string_view to_string(CompareDimension d);
std::string_view to_string(ReportFormat f);
std::optional<ReportKind> report_kind_from_string(std::string_view s);
std::optional<GroupBy> group_by_from_string(std::string_view s);
std::optional<Metric> metric_from_string(std::string_view s);
std::optional<CompareDimension> compare_dimension_from_string(std::string_view s);
std::optional<ReportFormat> report_format_from_string(std::string_view s);

struct ReportOptions {
  // Defaults per kind: protocol for protocol_panel, country for geo_panel,
  // provider for cdn_table, continent for count timeseries.
  std::optional<GroupBy> group_by;
  // count for panels and timeseries, plt for compare.
  std::optional<Metric> metric;
  std::chrono::seconds bucket{std::chrono::hours(24)};
  CompareDimension compare = CompareDimension::Browser;
  // Group the compare deltas are taken against; the first group in sort order
  // when unset.
  std::optional<std::string> baseline;

  bool operator==(const ReportOptions&) const = default;
};

// Tabular payload: rows hold JSON scalars (or small objects for breakdown
// columns) aligned with columns.
struct Report {
  ReportKind kind = ReportKind::CdnTable;
  std::vector<std::pair<std::string, std::string>> filters;
  ReportOptions options;
  std::vector<std::string> columns;
  std::vector<std::vector<nlohmann::json>> rows;
  bool empty = true;
  // Totals the rows conserve against (record_count, total, unlocated, ...).
  nlohmann::json summary = nlohmann::json::object();
  Timestamp generated_at{};

  // Index of a column; throws std::out_of_range when absent.
  size_t column(std::string_view name) const;

  bool operator==(const Report&) const = default;
};

// Aggregates records matching filter. Timing metrics use complete sessions
// only and report mean, median and p90 alongside the record count; volumes
// are summed. Throws Error(ConfigError) for options that do not apply to the
// kind.
Report aggregate(std::span<const MeasurementRecord> records, ReportKind kind, const QueryFilter& filter,
                 const ReportOptions& options, std::optional<Timestamp> generated_at = std::nullopt);

// Throws Error(FormatMismatch) for GeoJSON of anything but a geo panel.
std::string render(const Report& report, ReportFormat format);

nlohmann::json report_to_json(const Report& report);
// Inverse of the json rendering. Throws Error(MalformedDocument).
Report report_from_json(std::string_view text);

}  // namespace pageprobe
