#include "pageprobe/chrome.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <thread>

#include "pageprobe/error.hpp"

extern char** environ;

namespace pageprobe {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// CdpCapture

namespace {

double num(const json& j, const char* key, double fallback = -1) {
  auto it = j.find(key);
  return it != j.end() && it->is_number() ? it->get<double>() : fallback;
}

}  // namespace

void CdpCapture::on_event(const json& message) {
  if (!message.is_object() || !message.contains("method")) return;
  const std::string method = message["method"].get<std::string>();
  const json params = message.value("params", json::object());
  if (params.contains("timestamp") && params["timestamp"].is_number()) {
    last_ts_ = std::max(last_ts_, params["timestamp"].get<double>());
  }

  if (method == "Network.requestWillBeSent") {
    const std::string id = params.value("requestId", "");
    double ts = num(params, "timestamp", last_ts_);
    if (!has_origin_) {
      has_origin_ = true;
      origin_ts_ = ts;
      origin_wall_ = num(params, "wallTime", 0);
      main_frame_ = params.value("frameId", "");
    }
    auto it = open_.find(id);
    if (it != open_.end() && params.contains("redirectResponse")) {
      Request& prev = requests_[it->second];
      prev.response = params["redirectResponse"];
      prev.finish_ts = ts;
      open_.erase(it);
    }
    Request r;
    const json& req = params.value("request", json::object());
    r.url = req.value("url", "");
    r.method = req.value("method", "GET");
    r.issue_ts = ts;
    requests_.push_back(std::move(r));
    open_[id] = requests_.size() - 1;
  } else if (method == "Network.responseReceived") {
    auto it = open_.find(params.value("requestId", ""));
    if (it != open_.end()) requests_[it->second].response = params.value("response", json::object());
  } else if (method == "Network.dataReceived") {
    auto it = open_.find(params.value("requestId", ""));
    if (it != open_.end()) requests_[it->second].data_length += params.value("dataLength", 0LL);
  } else if (method == "Network.loadingFinished" || method == "Network.loadingFailed") {
    auto it = open_.find(params.value("requestId", ""));
    if (it == open_.end()) return;
    Request& r = requests_[it->second];
    r.finish_ts = num(params, "timestamp", last_ts_);
    if (method == "Network.loadingFailed") {
      r.failed = true;
    } else if (params.contains("encodedDataLength")) {
      r.encoded_length = static_cast<long long>(num(params, "encodedDataLength", -1));
    }
    open_.erase(it);
  } else if (method == "Page.domContentEventFired") {
    dcl_ts_ = num(params, "timestamp", last_ts_);
  } else if (method == "Page.loadEventFired") {
    load_ts_ = num(params, "timestamp", last_ts_);
  } else if (method == "Page.lifecycleEvent") {
    if (!main_frame_.empty() && params.value("frameId", main_frame_) != main_frame_) return;
    const std::string name = params.value("name", "");
    if (name == "firstPaint") paints_.emplace_back("first-paint", num(params, "timestamp", last_ts_));
    if (name == "firstContentfulPaint") {
      paints_.emplace_back("first-contentful-paint", num(params, "timestamp", last_ts_));
    }
  }
}

size_t CdpCapture::in_flight() const { return open_.size(); }

namespace {

double to_us(double ms) { return std::round(ms * 1000.0) / 1000.0; }

}  // namespace

HarEntry CdpCapture::to_entry(const Request& r) const {
  HarEntry e;
  e.url = r.url;
  e.method = r.method;
  e.start_offset_ms = std::max(0.0, offset_ms(r.issue_ts));
  const double finish = r.finish_ts.value_or(last_ts_);
  e.total_time_ms = to_us(std::max(0.0, (finish - r.issue_ts) * 1000.0));
  if (!r.response) return e;  // aborted: status 0

  const json& resp = *r.response;
  e.status = static_cast<int>(num(resp, "status", 0));
  e.http_version_raw = resp.value("protocol", "");
  e.mime_type = resp.value("mimeType", "");
  if (resp.contains("headers") && resp["headers"].is_object()) {
    for (const auto& [name, value] : resp["headers"].items()) {
      // Chromium folds repeated headers into one value separated by newlines.
      for (const auto& part : split(value.is_string() ? value.get<std::string>() : value.dump(), '\n')) {
        e.response_headers.add(name, part);
      }
    }
  }
  std::string ip = resp.value("remoteIPAddress", "");
  if (!ip.empty()) {
    if (ip.front() == '[' && ip.back() == ']') ip = ip.substr(1, ip.size() - 2);
    e.server_ip = ip;
  }
  e.body_size_bytes = r.data_length;
  e.transfer_size_bytes = r.encoded_length >= 0 ? r.encoded_length
                                                : static_cast<long long>(num(resp, "encodedDataLength", -1));

  if (resp.contains("timing") && resp["timing"].is_object()) {
    const json& t = resp["timing"];
    const double request_time = num(t, "requestTime", r.issue_ts);
    auto span = [&](const char* from, const char* to) {
      double a = num(t, from), b = num(t, to);
      return a >= 0 && b >= 0 ? std::max(0.0, b - a) : PhaseTimes::kAbsent;
    };
    double first = -1;
    for (const char* k : {"dnsStart", "connectStart", "sendStart"}) {
      if (num(t, k) >= 0) {
        first = num(t, k);
        break;
      }
    }
    PhaseTimes p;
    p.blocked = to_us(std::max(0.0, (request_time - r.issue_ts) * 1000.0 + std::max(first, 0.0)));
    p.dns = span("dnsStart", "dnsEnd");
    p.connect = span("connectStart", "connectEnd");
    p.ssl = span("sslStart", "sslEnd");
    p.send = std::max(0.0, span("sendStart", "sendEnd"));
    double headers_end = num(t, "receiveHeadersEnd", num(t, "sendEnd", 0));
    p.wait = std::max(0.0, headers_end - num(t, "sendEnd", 0));
    p.receive = to_us(std::max(0.0, (finish - request_time) * 1000.0 - headers_end));
    e.phase_times = p;
    e.total_time_ms = p.present_sum();
  }
  return e;
}

HarSession CdpCapture::session(const std::string& browser_name, const std::string& browser_version) const {
  HarSession s;
  s.browser_name = browser_name;
  s.browser_version = browser_version;
  auto wall = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(origin_wall_));
  s.started_at = Timestamp{wall};
  if (dcl_ts_) s.on_content_load_ms = offset_ms(*dcl_ts_);
  if (load_ts_) s.on_load_ms = offset_ms(*load_ts_);
  for (const auto& r : requests_) s.entries.push_back(to_entry(r));
  std::stable_sort(s.entries.begin(), s.entries.end(),
                   [](const HarEntry& a, const HarEntry& b) { return a.start_offset_ms < b.start_offset_ms; });
  if (!s.entries.empty()) s.page_url = s.entries.front().url;
  return s;
}

std::vector<PaintEvent> CdpCapture::paint_events() const {
  std::vector<PaintEvent> out;
  for (const auto& [name, ts] : paints_) out.push_back({name, offset_ms(ts)});
  return out;
}

// ---------------------------------------------------------------------------
// ChromeDriver

namespace {

[[noreturn]] void driver_error(const std::string& what) { throw Error(ErrorCode::DriverFailure, what); }

std::chrono::steady_clock::time_point after(std::chrono::milliseconds d) { return std::chrono::steady_clock::now() + d; }

}  // namespace

ChromeDriver::ChromeDriver(ChromeOptions options) : options_(std::move(options)) {
  std::string pattern = (fs::temp_directory_path() / "pageprobe-profile-XXXXXX").string();
  if (!::mkdtemp(pattern.data())) driver_error("cannot create a browser profile directory");
  profile_dir_ = pattern;
}

ChromeDriver::~ChromeDriver() {
  try {
    close();
  } catch (...) {
  }
  std::error_code ec;
  fs::remove_all(profile_dir_, ec);
}

void ChromeDriver::launch(const DriverSettings& settings) {
  if (pid_ > 0) close();
  int in[2], out[2];
  if (::pipe2(in, O_CLOEXEC) != 0 || ::pipe2(out, O_CLOEXEC) != 0) driver_error("pipe failed");

  std::vector<std::string> args = {options_.binary,
                                   "--remote-debugging-pipe",
                                   "--user-data-dir=" + profile_dir_,
                                   "--no-first-run",
                                   "--no-default-browser-check",
                                   "--window-size=" + std::to_string(options_.window.width) + "," +
                                       std::to_string(options_.window.height)};
  if (options_.headless) args.emplace_back("--headless=new");
  if (options_.extension_dir) {
    args.push_back("--load-extension=" + *options_.extension_dir);
  } else {
    args.emplace_back("--disable-extensions");
  }
  for (const auto& s : settings.chromium_switches()) args.push_back(s);
  for (const auto& s : options_.extra_args) args.push_back(s);
  args.emplace_back("about:blank");

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  // The browser reads commands on fd 3 and writes replies on fd 4.
  posix_spawn_file_actions_adddup2(&actions, in[0], 3);
  posix_spawn_file_actions_adddup2(&actions, out[1], 4);
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  pid_t pid = -1;
  int rc = ::posix_spawnp(&pid, options_.binary.c_str(), &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in[0]);
  ::close(out[1]);
  if (rc != 0) {
    ::close(in[1]);
    ::close(out[0]);
    driver_error("cannot start " + options_.binary + ": " + std::strerror(rc));
  }
  pid_ = pid;
  to_browser_ = in[1];
  from_browser_ = out[0];
  buffer_.clear();
  replies_.clear();
  json version = call("Browser.getVersion", json::object(), "", after(std::chrono::seconds(20)));
  std::string product = version.value("product", "");
  browser_version_ = product.substr(product.find('/') == std::string::npos ? product.size() : product.find('/') + 1);
}

int ChromeDriver::send(const std::string& method, const json& params, const std::string& session) {
  if (pid_ <= 0) driver_error("browser is not running");
  int id = next_id_++;
  json msg = {{"id", id}, {"method", method}, {"params", params}};
  if (!session.empty()) msg["sessionId"] = session;
  std::string bytes = msg.dump();
  bytes.push_back('\0');
  const char* p = bytes.data();
  size_t left = bytes.size();
  while (left > 0) {
    ssize_t n = ::write(to_browser_, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      driver_error("browser pipe closed");
    }
    p += n;
    left -= static_cast<size_t>(n);
  }
  return id;
}

std::optional<json> ChromeDriver::read_message(std::chrono::milliseconds slice) {
  for (;;) {
    size_t nul = buffer_.find('\0');
    if (nul != std::string::npos) {
      json msg = json::parse(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(nul), nullptr, false);
      buffer_.erase(0, nul + 1);
      if (msg.is_discarded()) driver_error("unparseable message from browser");
      return msg;
    }
    pollfd pfd{from_browser_, POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(slice.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc <= 0) return std::nullopt;
    char chunk[65536];
    ssize_t n = ::read(from_browser_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) driver_error("browser exited");
    buffer_.append(chunk, static_cast<size_t>(n));
  }
}

void ChromeDriver::dispatch(const json& message) {
  if (message.contains("id")) {
    replies_[message["id"].get<int>()] = message;
    return;
  }
  if (capture_ && message.value("sessionId", "") == capture_session_) capture_->on_event(message);
}

json ChromeDriver::await(int id, Deadline deadline, const std::stop_token* stop) {
  for (;;) {
    auto it = replies_.find(id);
    if (it != replies_.end()) {
      json reply = std::move(it->second);
      replies_.erase(it);
      if (reply.contains("error")) driver_error("protocol error: " + reply["error"].dump());
      return reply.value("result", json::object());
    }
    if (std::chrono::steady_clock::now() >= deadline || (stop && stop->stop_requested())) {
      driver_error("browser did not answer in time");
    }
    if (auto msg = read_message(std::chrono::milliseconds(50))) dispatch(*msg);
  }
}

json ChromeDriver::call(const std::string& method, const json& params, const std::string& session,
                        Deadline deadline) {
  return await(send(method, params, session), deadline);
}

NavigationResult ChromeDriver::navigate(const std::string& url, std::chrono::milliseconds timeout,
                                        std::stop_token stop) {
  const Deadline deadline = after(timeout);
  CdpCapture capture;
  NavigationResult result;

  json target = call("Target.createTarget", {{"url", "about:blank"}}, "", deadline);
  const std::string target_id = target.value("targetId", "");
  json attached = call("Target.attachToTarget", {{"targetId", target_id}, {"flatten", true}}, "", deadline);
  const std::string session = attached.value("sessionId", "");
  call("Network.enable", json::object(), session, deadline);
  call("Page.enable", json::object(), session, deadline);
  call("Page.setLifecycleEventsEnabled", {{"enabled", true}}, session, deadline);

  capture_ = &capture;
  capture_session_ = session;
  struct Detach {
    ChromeDriver* d;
    ~Detach() { d->capture_ = nullptr; }
  } detach{this};

  send("Page.navigate", {{"url", url}}, session);
  while (!capture.load_fired()) {
    if (std::chrono::steady_clock::now() >= deadline || stop.stop_requested()) {
      result.timed_out = true;
      break;
    }
    if (auto msg = read_message(std::chrono::milliseconds(50))) dispatch(*msg);
  }
  // Let responses already under way finish briefly after the load event.
  const Deadline settle = std::min(deadline, after(std::chrono::milliseconds(500)));
  while (!result.timed_out && capture.in_flight() > 0 && std::chrono::steady_clock::now() < settle &&
         !stop.stop_requested()) {
    if (auto msg = read_message(std::chrono::milliseconds(50))) dispatch(*msg);
  }
  capture_ = nullptr;
  try {
    send("Target.closeTarget", {{"targetId", target_id}});
  } catch (const Error&) {
  }

  HarSession har = capture.session("Chrome", browser_version_);
  if (har.entries.empty()) har.page_url = url;
  result.har = write_har(har);
  result.paint_events = capture.paint_events();
  return result;
}

void ChromeDriver::clear_resource_cache() {
  if (pid_ > 0) {
    auto deadline = after(std::chrono::seconds(10));
    json target = call("Target.createTarget", {{"url", "about:blank"}}, "", deadline);
    json attached =
        call("Target.attachToTarget", {{"targetId", target.value("targetId", "")}, {"flatten", true}}, "", deadline);
    call("Network.clearBrowserCache", json::object(), attached.value("sessionId", ""), deadline);
    call("Target.closeTarget", {{"targetId", target.value("targetId", "")}}, "", deadline);
    return;
  }
  std::error_code ec;
  for (const char* dir : {"Default/Cache", "Default/Code Cache", "Default/GPUCache"}) {
    fs::remove_all(fs::path(profile_dir_) / dir, ec);
  }
}

void ChromeDriver::reap(std::chrono::milliseconds wait) {
  auto deadline = after(wait);
  while (std::chrono::steady_clock::now() < deadline) {
    if (::waitpid(pid_, nullptr, WNOHANG) == pid_) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  ::kill(pid_, SIGKILL);
  ::waitpid(pid_, nullptr, 0);
}

void ChromeDriver::close() {
  if (pid_ <= 0) return;
  try {
    send("Browser.close", json::object());
  } catch (const Error&) {
  }
  reap(std::chrono::seconds(3));
  ::close(to_browser_);
  ::close(from_browser_);
  to_browser_ = from_browser_ = -1;
  pid_ = -1;
}

}  // namespace pageprobe
