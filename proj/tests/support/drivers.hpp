#pragma once

// Scripted BrowserDriver implementations for probe tests.

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "pageprobe/probe.hpp"

namespace testsupport {

// Records every call; navigate returns a fixed capture.
class InstrumentedDriver : public pageprobe::BrowserDriver {
 public:
  explicit InstrumentedDriver(std::string har = {}, std::vector<pageprobe::PaintEvent> paints = {});

  void launch(const pageprobe::DriverSettings& settings) override;
  pageprobe::NavigationResult navigate(const std::string& url, std::chrono::milliseconds timeout,
                                       std::stop_token stop) override;
  void clear_resource_cache() override;
  void clear_dns_cache() override;
  void close() override;

  std::vector<std::string> calls() const;
  std::vector<pageprobe::DriverSettings> launches() const;

 private:
  void log(std::string call);

  std::string har_;
  std::vector<pageprobe::PaintEvent> paints_;
  mutable std::mutex mu_;
  std::vector<std::string> calls_;
  std::vector<pageprobe::DriverSettings> launches_;
};

// navigate never completes on its own. Cooperative: returns a partial capture
// once stop is requested. Hard: ignores stop and sleeps for stall.
class StallingDriver : public InstrumentedDriver {
 public:
  enum class Mode { Cooperative, Hard };

  StallingDriver(Mode mode, std::string partial_har = {}, std::chrono::milliseconds stall = std::chrono::seconds(60));

  pageprobe::NavigationResult navigate(const std::string& url, std::chrono::milliseconds timeout,
                                       std::stop_token stop) override;

  // Stalls only on the given (1-based) navigation; others return partial_har.
  void stall_only_on(int navigation) { stall_on_ = navigation; }

 private:
  Mode mode_;
  std::string partial_;
  std::chrono::milliseconds stall_;
  std::atomic<int> navigations_{0};
  int stall_on_ = 0;
};

// Throws Error(DriverFailure) from the chosen call.
class FailingDriver : public InstrumentedDriver {
 public:
  enum class Stage { Launch, Navigate };
  explicit FailingDriver(Stage stage) : stage_(stage) {}

  void launch(const pageprobe::DriverSettings& settings) override;
  pageprobe::NavigationResult navigate(const std::string& url, std::chrono::milliseconds timeout,
                                       std::stop_token stop) override;

 private:
  Stage stage_;
};

}  // namespace testsupport
