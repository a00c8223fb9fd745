#include "generators.hpp"

#include <algorithm>
#include <cmath>

#include "pageprobe/probe.hpp"

namespace testsupport {

using namespace pageprobe;

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

bool coin(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

namespace {

// Multiples of 0.1 ms, kept exact by going through integer tenths.
double tenths(Rng& rng, int lo, int hi) { return uniform_int(rng, lo, hi) / 10.0; }

const std::vector<std::string> kHosts = {"www.site.com", "static.site.com", "cdn.fastcache.net", "img.pics.co.uk",
                                         "fonts.webfont.org", "ads.tracker.io", "api.site.com", "video.stream.fr"};

const std::vector<std::string> kMimes = {"text/html", "text/css", "application/javascript", "image/png", "image/jpeg",
                                         "font/woff2", "video/mp4", "application/json", "text/plain", ""};

}  // namespace

const std::vector<std::string>& protocol_tokens() {
  static const std::vector<std::string> tokens = {
      "http/1.1", "HTTP/1.1", "http/1.0", "h2", "H2", "http/2", "http/2.0", "HTTP/2.0", "h2c", "h3", "H3", "h3-29",
      "h3-Q050", "h3-23", "quic", "http/2+quic/43", "QUIC/39", "gquic", "spdy/3.1", "", "unknown", " h2 ", "http/3",
      "h3-", "h31", "hq-29", "http/1.1 "};
  return tokens;
}

std::string fuzz_protocol_string(Rng& rng) {
  static const std::vector<std::string> parts = {"h", "3", "2", "-", "quic", "QuIc", "http", "/", "1", ".", "0",
                                                 "c", "Q", "x", " ", "29", "spdy"};
  if (coin(rng, 0.3)) return pick(rng, protocol_tokens());
  std::string s;
  int n = uniform_int(rng, 0, 5);
  for (int i = 0; i < n; ++i) s += pick(rng, parts);
  return s;
}

std::vector<Interval> random_intervals(Rng& rng, size_t max_count, double horizon_ms) {
  const int horizon_tenths = static_cast<int>(std::lround(horizon_ms * 10));
  std::vector<Interval> out(static_cast<size_t>(uniform_int(rng, 0, static_cast<int>(max_count))));
  for (auto& iv : out) {
    iv.start_ms = tenths(rng, 0, horizon_tenths);
    iv.duration_ms = coin(rng, 0.1) ? 0.0 : tenths(rng, 1, std::max(1, horizon_tenths / 3));
  }
  return out;
}

HarSession random_session(Rng& rng, size_t max_entries, bool without_load) {
  HarSession s;
  s.page_url = "https://www.site.com/";
  s.started_at = Timestamp{std::chrono::seconds(1'550'000'000 + uniform_int(rng, 0, 10'000'000))};
  s.browser_name = "Chrome";
  s.browser_version = "75";
  size_t n = static_cast<size_t>(uniform_int(rng, 0, static_cast<int>(max_entries)));
  double latest_end = 0;
  for (size_t i = 0; i < n; ++i) {
    HarEntry e;
    e.url = (i == 0 ? std::string("https://www.site.com/") : "https://" + pick(rng, kHosts) + "/r" + std::to_string(i));
    if (coin(rng, 0.05)) e.url.replace(0, 5, "http");
    e.mime_type = i == 0 ? "text/html" : pick(rng, kMimes);
    e.status = coin(rng, 0.08) ? 0 : pick(rng, std::vector<int>{200, 200, 200, 204, 301, 304, 404});
    e.http_version_raw = pick(rng, protocol_tokens());
    e.body_size_bytes = uniform_int(rng, 0, 200'000);
    e.transfer_size_bytes = e.body_size_bytes + uniform_int(rng, 0, 600);
    e.server_ip = "10.0.0." + std::to_string(uniform_int(rng, 1, 9));
    e.start_offset_ms = i == 0 ? 0.0 : tenths(rng, 0, 40'000);
    PhaseTimes p;
    p.blocked = tenths(rng, 0, 50);
    p.send = tenths(rng, 0, 20);
    p.wait = tenths(rng, 0, 3000);
    p.receive = tenths(rng, 0, 5000);
    e.phase_times = p;
    e.total_time_ms = std::round(p.present_sum() * 10) / 10;
    latest_end = std::max(latest_end, e.end_offset_ms());
    s.entries.push_back(std::move(e));
  }
  std::stable_sort(s.entries.begin(), s.entries.end(),
                   [](const HarEntry& a, const HarEntry& b) { return a.start_offset_ms < b.start_offset_ms; });
  if (!without_load) {
    // Usually after the last response; sometimes earlier, as with late beacons.
    s.on_load_ms = coin(rng, 0.8) ? latest_end + tenths(rng, 0, 500) : tenths(rng, 0, static_cast<int>(latest_end * 10));
    s.on_content_load_ms = *s.on_load_ms * 0.7;
  }
  return s;
}

std::vector<PaintEvent> random_paints(Rng& rng, double plt_ms) {
  std::vector<PaintEvent> out;
  int n = uniform_int(rng, 0, 3);
  for (int i = 0; i < n; ++i) {
    out.push_back({pick(rng, std::vector<std::string>{"first-paint", "first-contentful-paint", "first-meaningful-paint"}),
                   uniform(rng, 0, std::max(plt_ms, 0.0))});
  }
  return out;
}

std::vector<DeliveryAttribution> random_attributions(Rng& rng, const HarSession& session) {
  static const std::vector<std::string> providers = {"Akamai", "Fastly", "Google", "No CDN", "Level 3", "Unknown",
                                                     "Unknown-CDN"};
  struct Place {
    const char* city;
    const char* country;
    std::optional<Continent> continent;
  };
  static const std::vector<Place> places = {{"Paris", "FR", Continent::EU},      {"Lannion", "FR", Continent::EU},
                                            {"Johannesburg", "ZA", Continent::AF}, {nullptr, "US", Continent::NA},
                                            {"Tokyo", "JP", Continent::AS},        {nullptr, nullptr, std::nullopt}};
  std::vector<DeliveryAttribution> out;
  for (const auto& e : session.entries) {
    if (e.aborted()) continue;
    DeliveryAttribution a;
    a.provider = pick(rng, providers);
    a.served_from_cache = coin(rng, 0.3);
    if (a.served_from_cache) a.delivering_server_label = "cache-" + std::to_string(uniform_int(rng, 1, 99));
    const Place& p = pick(rng, places);
    if (p.city) a.location.city = p.city;
    if (p.country) a.location.country = p.country;
    a.location.continent = p.continent;
    if (p.continent && coin(rng)) a.location.coordinates = LatLon{uniform(rng, -60, 60), uniform(rng, -170, 170)};
    a.origin_class = pick(rng, std::vector<OriginClass>{OriginClass::SameOrigin, OriginClass::NonOrigin,
                                                        OriginClass::Unknown});
    out.push_back(std::move(a));
  }
  return out;
}

SessionConfig random_session_config(Rng& rng) {
  SessionConfig c;
  c.browser = pick(rng, std::vector<BrowserInfo>{{"Chrome", "75"}, {"Chrome", "77"}, {"Firefox", "69"}});
  c.policy = ProtocolPolicy::for_requested(pick(
      rng, std::vector<RequestedProtocol>{RequestedProtocol::H1, RequestedProtocol::H2, RequestedProtocol::QUIC,
                                          RequestedProtocol::H2_REPEAT, RequestedProtocol::QUIC_REPEAT}));
  c.window = pick(rng, std::vector<Viewport>{{1440, 900}, {1920, 1080}, {375, 667}});
  c.adblock = coin(rng);
  c.probe = pick(rng, std::vector<ProbeIdentity>{{"lannion-1", "Lannion", "FR", AccessNetwork::Fiber, "Orange"},
                                                 {"paris-2", "Paris", "FR", AccessNetwork::ADSL, "Orange"},
                                                 {"curepipe-1", "Curepipe", "MU", AccessNetwork::ADSL, "Orange"},
                                                 {"tokyo-1", "Tokyo", "JP", AccessNetwork::WiFi, "Other"}});
  return c;
}

MeasurementRecord random_record(Rng& rng) {
  static const std::vector<std::string> sites = {"https://www.youtube.com/", "https://www.lefigaro.fr/",
                                                 "https://www.csdn.net/", "https://www.bbc.co.uk/",
                                                 "https://en.wikipedia.org/"};
  SessionConfig config = random_session_config(rng);
  HarSession session = random_session(rng, 30);
  session.page_url = pick(rng, sites);
  auto attributions = random_attributions(rng, session);
  Timings t;
  if (!session.entries.empty()) {
    auto paints = random_paints(rng, *session.on_load_ms);
    t = compute_timings(session, std::span<const PaintEvent>(paints), config.window);
  }
  MeasurementRecord r = build_record(session, config, attributions, t);
  // Two years at minute resolution, with collisions.
  r.timestamp = Timestamp{std::chrono::seconds(1'540'000'000) + std::chrono::minutes(uniform_int(rng, 0, 1'051'200))} +
                std::chrono::milliseconds(uniform_int(rng, 0, 2) * 250);
  r.status = pick(rng, std::vector<SessionStatus>{SessionStatus::Complete, SessionStatus::Complete,
                                                  SessionStatus::Complete, SessionStatus::Timeout,
                                                  SessionStatus::Failed});
  if (coin(rng, 0.2)) r.extra["note"] = std::string("quoted \"value\", with comma");
  if (coin(rng, 0.2)) r.extra["attempt"] = static_cast<long long>(uniform_int(rng, 1, 3));
  if (coin(rng, 0.1)) r.warnings.push_back("warning " + std::to_string(uniform_int(rng, 1, 5)));
  return r;
}

}  // namespace testsupport
