#include "pageprobe/probe.hpp"

#include <algorithm>
#include <condition_variable>
#include <filesystem>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "pageprobe/error.hpp"

namespace pageprobe {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// ReplayDriver

ReplayDriver::ReplayDriver(std::string directory) : directory_(std::move(directory)) {}

void ReplayDriver::launch(const DriverSettings& settings) { settings_ = settings; }

NavigationResult ReplayDriver::navigate(const std::string& url, std::chrono::milliseconds, std::stop_token) {
  std::string host = url_host(url);
  if (host.empty()) host = url;
  for (const auto& stem : {host, registrable_domain(host)}) {
    fs::path har = fs::path(directory_) / (stem + ".har");
    if (!fs::exists(har)) continue;
    NavigationResult result;
    result.har = read_file(har.string());
    fs::path paint = fs::path(directory_) / (stem + ".paint.json");
    if (fs::exists(paint)) {
      json events = json::parse(read_file(paint.string()), nullptr, false);
      if (!events.is_array()) throw Error(ErrorCode::DriverFailure, "bad paint file " + paint.string());
      for (const auto& ev : events) {
        result.paint_events.push_back({ev.value("name", ""), ev.value("offset_ms", 0.0)});
      }
    }
    return result;
  }
  throw Error(ErrorCode::DriverFailure, "no capture for " + url + " in " + directory_);
}

// ---------------------------------------------------------------------------
// Analysis

MeasurementRecord analyze_session(const HarSession& session, const SessionConfig& config,
                                  std::optional<std::span<const PaintEvent>> paint_events,
                                  const DeliveryContext& ctx) {
  std::string homepage = registrable_domain(url_host(session.page_url), *ctx.suffixes);
  std::vector<DeliveryAttribution> attributions;
  for (const auto& e : session.entries) {
    if (!e.aborted()) attributions.push_back(attribute_delivery(e, homepage, ctx));
  }
  Timings timings;
  std::vector<std::string> extra_warnings;
  try {
    timings = compute_timings(session, paint_events, config.window);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptySession) throw;
    extra_warnings.emplace_back("empty capture: no timings");
  }
  if (timings.first_paint_ms && *timings.first_paint_ms > timings.page_load_time_ms) {
    extra_warnings.emplace_back("first paint reported after the load event");
  }
  MeasurementRecord record = build_record(session, config, attributions, timings, *ctx.suffixes);
  record.warnings.insert(record.warnings.end(), extra_warnings.begin(), extra_warnings.end());
  return record;
}

// ---------------------------------------------------------------------------
// Sessions

namespace {

Timestamp now_from(const ProbeOptions& options) {
  if (options.clock) return options.clock();
  return std::chrono::time_point_cast<std::chrono::microseconds>(std::chrono::system_clock::now());
}

struct Navigation {
  NavigationResult result;
  bool watchdog_fired = false;
  // The driver did not return within the grace period and was left behind.
  bool abandoned = false;
};

// Runs driver->navigate on a worker thread so that the timeout holds even
// when the driver ignores it. An abandoned worker keeps the driver alive
// through its shared_ptr until it returns.
// Deadlines count from pass_start (just before launch), and abandonment keeps
// a small reserve so the whole pass, record included, fits in timeout + grace.
Navigation navigate_with_watchdog(const std::shared_ptr<BrowserDriver>& driver, const std::string& url,
                                  std::chrono::milliseconds timeout, std::chrono::milliseconds grace,
                                  std::chrono::steady_clock::time_point pass_start) {
  constexpr auto kReserve = std::chrono::milliseconds(50);
  struct State {
    std::mutex mu;
    std::condition_variable cv;
    bool done = false;
    NavigationResult result;
    std::exception_ptr error;
    std::stop_source stop;
  };
  auto state = std::make_shared<State>();
  const auto stop_at = pass_start + timeout;
  const auto abandon_at = stop_at + std::max(grace - kReserve, std::chrono::milliseconds(0));

  const auto budget =
      std::chrono::duration_cast<std::chrono::milliseconds>(stop_at - std::chrono::steady_clock::now());
  std::thread([state, driver, url, budget] {
    NavigationResult result;
    std::exception_ptr error;
    try {
      result = driver->navigate(url, budget, state->stop.get_token());
    } catch (...) {
      error = std::current_exception();
    }
    std::lock_guard lock(state->mu);
    state->result = std::move(result);
    state->error = error;
    state->done = true;
    state->cv.notify_all();
  }).detach();

  Navigation nav;
  std::unique_lock lock(state->mu);
  if (!state->cv.wait_until(lock, stop_at, [&] { return state->done; })) {
    nav.watchdog_fired = true;
    state->stop.request_stop();
    if (!state->cv.wait_until(lock, abandon_at, [&] { return state->done; })) {
      nav.abandoned = true;
      nav.result.timed_out = true;
      return nav;
    }
  }
  if (state->error) std::rethrow_exception(state->error);
  nav.result = std::move(state->result);
  if (nav.watchdog_fired) nav.result.timed_out = true;
  return nav;
}

MeasurementRecord bare_record(const SessionConfig& config, const std::string& url, const DeliveryContext& ctx) {
  HarSession empty;
  empty.page_url = url;
  MeasurementRecord r = build_record(empty, config, {}, Timings{}, *ctx.suffixes);
  return r;
}

}  // namespace

MeasurementRecord run_session(const SessionConfig& config, const std::string& url,
                              const std::shared_ptr<BrowserDriver>& driver, const DeliveryContext& ctx,
                              const ProbeOptions& options) {
  config.validate();
  const DriverSettings settings = policy_settings(config.policy);
  const auto timeout = std::chrono::milliseconds(static_cast<long long>(config.timeout_ms));
  Timestamp measured_at = now_from(options);
  std::vector<std::string> notes;

  auto finish = [&](MeasurementRecord r, SessionStatus status) {
    r.url = url;
    r.website = registrable_domain(url_host(url), *ctx.suffixes);
    r.timestamp = truncate_to_millis(measured_at);
    r.status = status;
    r.warnings.insert(r.warnings.end(), notes.begin(), notes.end());
    return r;
  };
  auto failed = [&](const std::string& reason) {
    notes.push_back("session failed: " + reason);
    MeasurementRecord r = finish(bare_record(config, url, ctx), SessionStatus::Failed);
    r.extra["failure_reason"] = reason;
    return r;
  };

  Navigation nav;
  auto pass_start = std::chrono::steady_clock::now();
  try {
    driver->launch(settings);
    driver->clear_resource_cache();
    if (settings.two_pass) {
      Navigation warmup = navigate_with_watchdog(driver, url, timeout, options.grace, pass_start);
      if (warmup.result.timed_out) {
        notes.emplace_back("warm-up navigation timed out; measured pass skipped");
        if (!warmup.abandoned) driver->close();
        return finish(bare_record(config, url, ctx), SessionStatus::Timeout);
      }
      driver->close();
      driver->clear_resource_cache();
      pass_start = std::chrono::steady_clock::now();
      driver->launch(settings);
    }
    measured_at = now_from(options);
    nav = navigate_with_watchdog(driver, url, timeout, options.grace, pass_start);
    if (nav.abandoned) {
      notes.emplace_back("driver did not stop within the grace period; browser abandoned");
    } else {
      driver->close();
    }
  } catch (const Error& e) {
    return failed(e.what());
  } catch (const std::exception& e) {
    return failed(std::string("driver error: ") + e.what());
  }

  const SessionStatus status = nav.result.timed_out ? SessionStatus::Timeout : SessionStatus::Complete;
  if (status == SessionStatus::Timeout) {
    notes.push_back("navigation exceeded " + std::to_string(timeout.count()) + " ms timeout");
  }

  HarSession session;
  if (trim(nav.result.har).empty()) {
    notes.emplace_back("driver returned no capture");
    session.page_url = url;
  } else {
    try {
      session = parse_har(nav.result.har);
    } catch (const Error& e) {
      if (status == SessionStatus::Complete) return failed(e.what());
      notes.push_back(std::string("partial capture unreadable: ") + e.what());
      session = HarSession{};
      session.page_url = url;
    }
  }
  if (session.page_url.empty()) session.page_url = url;
  if (session.entries.empty() && status == SessionStatus::Complete) notes.emplace_back("capture has no entries");

  std::optional<std::span<const PaintEvent>> paints;
  if (!nav.result.paint_events.empty()) paints = std::span<const PaintEvent>(nav.result.paint_events);
  MeasurementRecord record = analyze_session(session, config, paints, ctx);
  if (!session.page_url.empty() && session.page_url != url) record.extra["final_url"] = session.page_url;
  return finish(std::move(record), status);
}

CampaignSummary run_campaign(const SessionConfig& config, const std::vector<std::string>& urls,
                             const DriverFactory& driver_factory, RecordStore& store, const DeliveryContext& ctx,
                             const ProbeOptions& options) {
  if (urls.empty()) throw Error(ErrorCode::ConfigError, "campaign has no websites");
  config.validate();
  CampaignSummary summary;
  std::optional<Timestamp> last;
  for (const auto& url : urls) {
    MeasurementRecord record;
    try {
      std::shared_ptr<BrowserDriver> driver = driver_factory(url);
      if (!driver) throw Error(ErrorCode::DriverFailure, "driver factory returned nothing");
      record = run_session(config, url, driver, ctx, options);
    } catch (const std::exception& e) {
      HarSession empty;
      empty.page_url = url;
      record = build_record(empty, config, {}, Timings{}, *ctx.suffixes);
      record.timestamp = truncate_to_millis(now_from(options));
      record.status = SessionStatus::Failed;
      record.warnings.push_back(std::string("session failed: ") + e.what());
      record.extra["failure_reason"] = std::string(e.what());
    }
    // Records of one campaign keep the list order on the time axis.
    if (last && record.timestamp <= *last) record.timestamp = *last + std::chrono::milliseconds(1);
    last = record.timestamp;

    switch (record.status) {
      case SessionStatus::Complete: ++summary.complete; break;
      case SessionStatus::Timeout: ++summary.timeout; break;
      case SessionStatus::Failed: ++summary.failed; break;
    }
    summary.record_ids.push_back(store.append(record));
  }
  return summary;
}

}  // namespace pageprobe
