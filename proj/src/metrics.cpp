#include "pageprobe/metrics.hpp"

#include <algorithm>
#include <set>

#include "pageprobe/error.hpp"

namespace pageprobe {

std::string_view to_string(FpSource s) {
  switch (s) {
    case FpSource::DriverEvent: return "driver_event";
    case FpSource::FallbackEstimate: return "fallback_estimate";
    case FpSource::Absent: return "absent";
  }
  return "absent";
}

std::optional<FpSource> fp_source_from_string(std::string_view s) {
  for (auto v : {FpSource::DriverEvent, FpSource::FallbackEstimate, FpSource::Absent}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::string_view to_string(MimeClass c) {
  switch (c) {
    case MimeClass::Document: return "document";
    case MimeClass::Script: return "script";
    case MimeClass::Stylesheet: return "stylesheet";
    case MimeClass::Image: return "image";
    case MimeClass::Font: return "font";
    case MimeClass::Media: return "media";
    case MimeClass::Other: return "other";
  }
  return "other";
}

std::optional<MimeClass> mime_class_from_string(std::string_view s) {
  for (size_t i = 0; i < kMimeClassCount; ++i) {
    auto c = static_cast<MimeClass>(i);
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

MimeClass classify_mime(std::string_view mime_type) {
  std::string m = to_lower(trim(mime_type.substr(0, mime_type.find(';'))));
  if (m == "text/html" || m == "application/xhtml+xml") return MimeClass::Document;
  if (m.find("javascript") != std::string::npos || m == "text/js" || m == "application/ecmascript") {
    return MimeClass::Script;
  }
  if (m == "text/css") return MimeClass::Stylesheet;
  if (m.rfind("image/", 0) == 0) return MimeClass::Image;
  if (m.rfind("font/", 0) == 0 || m.find("/font-") != std::string::npos || m.find("/x-font-") != std::string::npos) {
    return MimeClass::Font;
  }
  if (m.rfind("audio/", 0) == 0 || m.rfind("video/", 0) == 0) return MimeClass::Media;
  return MimeClass::Other;
}

double network_busy_time(std::span<const Interval> intervals, double horizon_ms) {
  std::vector<std::pair<double, double>> clipped;
  clipped.reserve(intervals.size());
  for (const auto& iv : intervals) {
    double start = std::max(iv.start_ms, 0.0);
    double end = std::min(iv.start_ms + std::max(iv.duration_ms, 0.0), horizon_ms);
    if (end > start) clipped.emplace_back(start, end);
  }
  std::sort(clipped.begin(), clipped.end());
  double busy = 0.0;
  double cur_start = 0.0, cur_end = -1.0;
  for (const auto& [s, e] : clipped) {
    if (s > cur_end) {
      if (cur_end > cur_start) busy += cur_end - cur_start;
      cur_start = s;
      cur_end = e;
    } else {
      cur_end = std::max(cur_end, e);
    }
  }
  if (cur_end > cur_start) busy += cur_end - cur_start;
  return busy;
}

namespace {

bool is_recognized_paint(std::string_view name) {
  return name == "first-paint" || name == "first-contentful-paint";
}

const HarEntry* main_document(const HarSession& session) {
  const HarEntry* first_live = nullptr;
  for (const auto& e : session.entries) {
    if (e.aborted()) continue;
    if (!first_live) first_live = &e;
    if (classify_mime(e.mime_type) == MimeClass::Document) return &e;
  }
  return first_live;
}

}  // namespace

Timings compute_timings(const HarSession& session, std::optional<std::span<const PaintEvent>> paint_events,
                        Viewport viewport) {
  if (session.entries.empty() && !session.on_load_ms) {
    throw Error(ErrorCode::EmptySession, "no entries and no load event");
  }
  if (viewport.width <= 0 || viewport.height <= 0) {
    throw Error(ErrorCode::ConfigError, "viewport dimensions must be positive");
  }

  Timings t;
  if (session.on_load_ms) {
    t.page_load_time_ms = *session.on_load_ms;
  } else {
    for (const auto& e : session.entries) t.page_load_time_ms = std::max(t.page_load_time_ms, e.end_offset_ms());
  }
  const double plt = t.page_load_time_ms;

  std::vector<Interval> intervals;
  intervals.reserve(session.entries.size());
  for (const auto& e : session.entries) intervals.push_back({e.start_offset_ms, e.total_time_ms});
  t.network_busy_ms = network_busy_time(intervals, plt);
  t.processing_time_ms = std::max(0.0, plt - t.network_busy_ms);

  if (paint_events) {
    for (const auto& ev : *paint_events) {
      if (!is_recognized_paint(ev.name)) continue;
      if (!t.first_paint_ms || ev.offset_ms < *t.first_paint_ms) t.first_paint_ms = ev.offset_ms;
    }
    if (t.first_paint_ms) t.fp_source = FpSource::DriverEvent;
  }

  const HarEntry* doc = main_document(session);
  if (!doc) return t;

  if (!t.first_paint_ms) {
    double doc_end = doc->end_offset_ms();
    double estimate = doc_end;
    for (const auto& e : session.entries) {
      if (e.aborted() || classify_mime(e.mime_type) != MimeClass::Stylesheet) continue;
      if (e.start_offset_ms < doc_end) estimate = std::max(estimate, e.end_offset_ms());
    }
    t.first_paint_ms = std::min(estimate, plt);
    t.fp_source = FpSource::FallbackEstimate;
  }

  const double fp = *t.first_paint_ms;
  double critical_end = doc->end_offset_ms();
  for (const auto& e : session.entries) {
    if (e.aborted()) continue;
    bool critical = false;
    switch (classify_mime(e.mime_type)) {
      case MimeClass::Document: critical = &e == doc; break;
      case MimeClass::Stylesheet:
      case MimeClass::Font: critical = true; break;
      case MimeClass::Script:
      case MimeClass::Image: critical = e.start_offset_ms < fp; break;
      default: break;
    }
    if (critical) critical_end = std::max(critical_end, e.end_offset_ms());
  }
  t.tfvr_ms = std::min(std::max(critical_end, fp), plt);
  return t;
}

ResourceStats resource_stats(const HarSession& session, const PublicSuffixList& suffixes) {
  ResourceStats s;
  std::set<std::string> domains;
  long long https = 0;
  double rate_sum = 0.0;
  long long rate_n = 0;
  for (const auto& e : session.entries) {
    if (e.aborted()) {
      ++s.aborted_count;
      continue;
    }
    ++s.resource_count;
    long long body = std::max(e.body_size_bytes, 0LL);
    s.total_body_bytes += body;
    if (e.transfer_size_bytes > 0) s.total_transfer_bytes += e.transfer_size_bytes;
    auto& cls = s.per_mime_class[static_cast<size_t>(classify_mime(e.mime_type))];
    ++cls.count;
    cls.bytes += body;
    if (std::string host = url_host(e.url); !host.empty()) domains.insert(registrable_domain(host, suffixes));
    if (url_scheme(e.url) == "https") ++https;
    double receive = e.phase_times.receive;
    if (PhaseTimes::present(receive) && receive > 0.0 && e.transfer_size_bytes >= 0) {
      rate_sum += static_cast<double>(e.transfer_size_bytes) / (receive / 1000.0);
      ++rate_n;
    }
  }
  s.domain_count = static_cast<long long>(domains.size());
  if (s.resource_count > 0) s.https_fraction = static_cast<double>(https) / static_cast<double>(s.resource_count);
  if (rate_n > 0) s.mean_transfer_rate_bytes_per_s = rate_sum / static_cast<double>(rate_n);
  return s;
}

}  // namespace pageprobe
