#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pageprobe/domain.hpp"
#include "pageprobe/har.hpp"

namespace pageprobe {

enum class FpSource { DriverEvent, FallbackEstimate, Absent };

std::string_view to_string(FpSource s);
std::optional<FpSource> fp_source_from_string(std::string_view s);

struct Timings {
  std::optional<double> first_paint_ms;
  double page_load_time_ms = 0.0;
  std::optional<double> tfvr_ms;
  double processing_time_ms = 0.0;
  double network_busy_ms = 0.0;
  FpSource fp_source = FpSource::Absent;

  bool operator==(const Timings&) const = default;
};

enum class MimeClass { Document, Script, Stylesheet, Image, Font, Media, Other };
inline constexpr size_t kMimeClassCount = 7;

std::string_view to_string(MimeClass c);
std::optional<MimeClass> mime_class_from_string(std::string_view s);
MimeClass classify_mime(std::string_view mime_type);

struct ClassTotals {
  long long count = 0;
  long long bytes = 0;

  bool operator==(const ClassTotals&) const = default;
};

struct ResourceStats {
  long long resource_count = 0;
  long long aborted_count = 0;
  long long domain_count = 0;
  long long total_body_bytes = 0;
  long long total_transfer_bytes = 0;
  std::array<ClassTotals, kMimeClassCount> per_mime_class{};
  double mean_transfer_rate_bytes_per_s = 0.0;
  double https_fraction = 0.0;

  const ClassTotals& of(MimeClass c) const { return per_mime_class[static_cast<size_t>(c)]; }

  bool operator==(const ResourceStats&) const = default;
};

struct PaintEvent {
  std::string name;
  double offset_ms = 0.0;

  bool operator==(const PaintEvent&) const = default;
};

struct Viewport {
  int width = 1440;
  int height = 900;

  bool operator==(const Viewport&) const = default;
};

struct Interval {
  double start_ms = 0.0;
  double duration_ms = 0.0;
};

// Length of the union of [start, min(start + duration, horizon)].
double network_busy_time(std::span<const Interval> intervals, double horizon_ms);

// Load-time metrics of one navigation.
//
// PLT is the load event when the capture has one, otherwise the completion of
// the last entry. FP comes from the earliest recognized paint event
// ("first-paint", "first-contentful-paint"); without events it is estimated
// as the completion of the main document and every stylesheet requested
// before the document finished. TFVR is the completion of the critical set
// (main document, stylesheets, fonts, and scripts/images requested before
// FP), never earlier than FP and never later than PLT.
//
// Throws Error(EmptySession) for a session with no entries and no load event.
Timings compute_timings(const HarSession& session, std::optional<std::span<const PaintEvent>> paint_events,
                        Viewport viewport);

ResourceStats resource_stats(const HarSession& session, const PublicSuffixList& suffixes = PublicSuffixList::bundled());

}  // namespace pageprobe
