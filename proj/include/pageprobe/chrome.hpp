#pragma once

#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pageprobe/har.hpp"
#include "pageprobe/metrics.hpp"
#include "pageprobe/probe.hpp"

namespace pageprobe {

// Folds DevTools protocol events (Network.*, Page.*) of one navigation into a
// HAR session. Offsets count from the first request; the timeline uses the
// protocol's monotonic timestamps.
class CdpCapture {
 public:
  // message is a protocol event object {"method": ..., "params": {...}};
  // anything else is ignored.
  void on_event(const nlohmann::json& message);

  bool load_fired() const { return load_ts_.has_value(); }
  size_t in_flight() const;

  // Requests still open are closed at the last event seen; those that never
  // got a response are reported as aborted.
  HarSession session(const std::string& browser_name = "Chrome", const std::string& browser_version = "") const;
  std::vector<PaintEvent> paint_events() const;

 private:
  struct Request {
    std::string url;
    std::string method = "GET";
    double issue_ts = 0;
    std::optional<nlohmann::json> response;
    std::optional<double> finish_ts;
    bool failed = false;
    long long data_length = 0;
    long long encoded_length = -1;
  };

  HarEntry to_entry(const Request& r) const;
  // Millisecond offsets at microsecond resolution, as a HAR stores them.
  double offset_ms(double ts) const { return std::round((ts - origin_ts_) * 1e6) / 1000.0; }

  std::vector<Request> requests_;
  std::map<std::string, size_t> open_;
  bool has_origin_ = false;
  double origin_ts_ = 0;
  double origin_wall_ = 0;
  std::string main_frame_;
  std::optional<double> dcl_ts_, load_ts_;
  double last_ts_ = 0;
  std::vector<std::pair<std::string, double>> paints_;
};

struct ChromeOptions {
  std::string binary = "chromium";
  Viewport window;
  bool headless = true;
  // Unpacked extension loaded when set (ad blocking runs as an extension).
  std::optional<std::string> extension_dir;
  std::vector<std::string> extra_args;
};

// Drives Chromium over --remote-debugging-pipe. Resource cache clears remove
// the profile's cache; Chromium exposes no host-cache control, so
// clear_dns_cache is a no-op (the probe never calls it between passes).
class ChromeDriver final : public BrowserDriver {
 public:
  explicit ChromeDriver(ChromeOptions options);
  ~ChromeDriver() override;

  ChromeDriver(const ChromeDriver&) = delete;
  ChromeDriver& operator=(const ChromeDriver&) = delete;

  void launch(const DriverSettings& settings) override;
  NavigationResult navigate(const std::string& url, std::chrono::milliseconds timeout, std::stop_token stop) override;
  void clear_resource_cache() override;
  void clear_dns_cache() override {}
  void close() override;

 private:
  using Deadline = std::chrono::steady_clock::time_point;

  int send(const std::string& method, const nlohmann::json& params, const std::string& session = "");
  // Waits for the reply to id, feeding events to capture_. Throws
  // Error(DriverFailure) on a protocol error or a dead browser.
  nlohmann::json await(int id, Deadline deadline, const std::stop_token* stop = nullptr);
  nlohmann::json call(const std::string& method, const nlohmann::json& params, const std::string& session,
                      Deadline deadline);
  // Reads one message; nullopt when nothing arrived within slice.
  std::optional<nlohmann::json> read_message(std::chrono::milliseconds slice);
  void dispatch(const nlohmann::json& message);
  void reap(std::chrono::milliseconds wait);

  ChromeOptions options_;
  std::string profile_dir_;
  int pid_ = -1;
  int to_browser_ = -1;
  int from_browser_ = -1;
  int next_id_ = 1;
  std::string buffer_;
  std::map<int, nlohmann::json> replies_;
  CdpCapture* capture_ = nullptr;
  std::string capture_session_;
  std::string browser_version_;
};

}  // namespace pageprobe
