#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stop_token>
#include <string>
#include <vector>

#include "pageprobe/config.hpp"
#include "pageprobe/delivery.hpp"
#include "pageprobe/record.hpp"
#include "pageprobe/store.hpp"

namespace pageprobe {

struct NavigationResult {
  std::string har;
  std::vector<PaintEvent> paint_events;
  bool timed_out = false;
};

// Browser capability used by the probe. Implementations throw
// Error(DriverFailure) when the browser cannot be driven.
class BrowserDriver {
 public:
  virtual ~BrowserDriver() = default;

  virtual void launch(const DriverSettings& settings) = 0;
  // Loads url and returns the capture. When stop is requested (the probe's
  // timeout fired) the driver should return promptly with whatever it has and
  // timed_out set.
  virtual NavigationResult navigate(const std::string& url, std::chrono::milliseconds timeout,
                                    std::stop_token stop) = 0;
  virtual void clear_resource_cache() = 0;
  virtual void clear_dns_cache() = 0;
  virtual void close() = 0;
};

// Serves pre-captured HAR files: <dir>/<host>.har, then
// <dir>/<registrable domain>.har. Paint events are read from a sibling
// <stem>.paint.json holding [{"name": "first-paint", "offset_ms": 410}].
class ReplayDriver final : public BrowserDriver {
 public:
  explicit ReplayDriver(std::string directory);

  void launch(const DriverSettings& settings) override;
  NavigationResult navigate(const std::string& url, std::chrono::milliseconds timeout, std::stop_token stop) override;
  void clear_resource_cache() override {}
  void clear_dns_cache() override {}
  void close() override {}

  const std::optional<DriverSettings>& settings() const { return settings_; }

 private:
  std::string directory_;
  std::optional<DriverSettings> settings_;
};

struct ProbeOptions {
  // Allowance over the session timeout for the driver to hand back a partial
  // capture once stopped.
  std::chrono::milliseconds grace{1000};
  // Wall clock used to stamp records; system clock when unset.
  std::function<Timestamp()> clock;
};

// Attribution, timings and aggregation for one captured navigation.
MeasurementRecord analyze_session(const HarSession& session, const SessionConfig& config,
                                  std::optional<std::span<const PaintEvent>> paint_events,
                                  const DeliveryContext& ctx);

// Measures url once, or twice in repeat mode with only the second pass kept.
// A navigation exceeding config.timeout_ms yields status timeout; driver
// failures yield status failed with the reason in warnings and
// extra["failure_reason"]. Never throws for driver problems.
MeasurementRecord run_session(const SessionConfig& config, const std::string& url,
                              const std::shared_ptr<BrowserDriver>& driver, const DeliveryContext& ctx,
                              const ProbeOptions& options = {});

using DriverFactory = std::function<std::shared_ptr<BrowserDriver>(const std::string& url)>;

struct CampaignSummary {
  long long complete = 0;
  long long timeout = 0;
  long long failed = 0;
  std::vector<std::uint64_t> record_ids;

  long long total() const { return complete + timeout + failed; }
};

// Visits urls in order, one session at a time, appending every outcome to
// store. Per-site failures are recorded and the campaign continues; a store
// failure propagates as Error(StoreFailure).
CampaignSummary run_campaign(const SessionConfig& config, const std::vector<std::string>& urls,
                             const DriverFactory& driver_factory, RecordStore& store, const DeliveryContext& ctx,
                             const ProbeOptions& options = {});

}  // namespace pageprobe
