#include "drivers.hpp"

#include <condition_variable>
#include <thread>

#include "pageprobe/error.hpp"

namespace testsupport {

using namespace pageprobe;

InstrumentedDriver::InstrumentedDriver(std::string har, std::vector<PaintEvent> paints)
    : har_(std::move(har)), paints_(std::move(paints)) {}

void InstrumentedDriver::log(std::string call) {
  std::lock_guard lock(mu_);
  calls_.push_back(std::move(call));
}

void InstrumentedDriver::launch(const DriverSettings& settings) {
  {
    std::lock_guard lock(mu_);
    launches_.push_back(settings);
  }
  log("launch");
}

NavigationResult InstrumentedDriver::navigate(const std::string&, std::chrono::milliseconds, std::stop_token) {
  log("navigate");
  return {har_, paints_, false};
}

void InstrumentedDriver::clear_resource_cache() { log("clear_resource_cache"); }
void InstrumentedDriver::clear_dns_cache() { log("clear_dns_cache"); }
void InstrumentedDriver::close() { log("close"); }

std::vector<std::string> InstrumentedDriver::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::vector<DriverSettings> InstrumentedDriver::launches() const {
  std::lock_guard lock(mu_);
  return launches_;
}

StallingDriver::StallingDriver(Mode mode, std::string partial_har, std::chrono::milliseconds stall)
    : mode_(mode), partial_(std::move(partial_har)), stall_(stall) {}

NavigationResult StallingDriver::navigate(const std::string& url, std::chrono::milliseconds timeout,
                                          std::stop_token stop) {
  InstrumentedDriver::navigate(url, timeout, stop);
  int n = ++navigations_;
  if (stall_on_ != 0 && n != stall_on_) return {partial_, {}, false};
  if (mode_ == Mode::Hard) {
    std::this_thread::sleep_for(stall_);
    return {partial_, {}, false};
  }
  std::mutex mu;
  std::condition_variable_any cv;
  std::unique_lock lock(mu);
  cv.wait_for(lock, stop, stall_, [] { return false; });
  return {partial_, {}, true};
}

void FailingDriver::launch(const DriverSettings& settings) {
  InstrumentedDriver::launch(settings);
  if (stage_ == Stage::Launch) throw Error(ErrorCode::DriverFailure, "browser binary missing");
}

NavigationResult FailingDriver::navigate(const std::string& url, std::chrono::milliseconds timeout,
                                         std::stop_token stop) {
  InstrumentedDriver::navigate(url, timeout, stop);
  if (stage_ == Stage::Navigate) throw Error(ErrorCode::DriverFailure, "renderer crashed");
  return {};
}

}  // namespace testsupport
