#include <doctest.h>

#include <set>

#include "../support/fixtures.hpp"
#include "../support/generators.hpp"
#include "../support/oracles.hpp"
#include "pageprobe/error.hpp"
#include "pageprobe/metrics.hpp"

using namespace pageprobe;

namespace {

HarEntry timed(double start, double duration, std::string mime = "image/png", int status = 200) {
  HarEntry e;
  e.url = "https://www.site.com/" + std::to_string(static_cast<int>(start));
  e.start_offset_ms = start;
  e.total_time_ms = duration;
  e.mime_type = std::move(mime);
  e.status = status;
  return e;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("busy time of overlapping, disjoint and empty interval sets") {
    std::vector<Interval> overlap = {{0, 100}, {50, 100}};
    CHECK(network_busy_time(overlap, 200) == 150);
    CHECK(testsupport::occupancy_scan_busy_ms(overlap, 200) == doctest::Approx(150));
    std::vector<Interval> disjoint = {{0, 10}, {20, 10}};
    CHECK(network_busy_time(disjoint, 100) == 20);
    CHECK(network_busy_time({}, 100) == 0);
    // Clipped at the horizon.
    CHECK(network_busy_time(overlap, 120) == 120);
  }

  TEST_CASE("busy time agrees with a 0.1 ms occupancy scan") {
    testsupport::Rng rng(5150);
    for (int i = 0; i < 200; ++i) {
      double horizon = testsupport::uniform_int(rng, 1, 30000) / 10.0;
      auto intervals = testsupport::random_intervals(rng, 50, horizon);
      double fast = network_busy_time(intervals, horizon);
      REQUIRE(std::abs(fast - testsupport::occupancy_scan_busy_ms(intervals, horizon)) <= 0.2);
      CHECK(fast <= horizon + 1e-9);
    }
  }

  TEST_CASE("single entry: PLT from the load event, processing is the idle remainder") {
    HarSession s;
    s.entries = {timed(0, 300, "text/html")};
    s.on_load_ms = 320;
    Timings t = compute_timings(s, std::nullopt, {});
    CHECK(t.page_load_time_ms == 320);
    CHECK(t.network_busy_ms == 300);
    CHECK(t.processing_time_ms == 20);
  }

  TEST_CASE("two overlapping entries leave 50 ms of processing") {
    HarSession s;
    s.entries = {timed(0, 100, "text/html"), timed(50, 100)};
    s.on_load_ms = 200;
    CHECK(compute_timings(s, std::nullopt, {}).processing_time_ms == 50);
  }

  TEST_CASE("PLT falls back to the last completion without a load event") {
    HarSession s;
    s.entries = {timed(0, 100, "text/html"), timed(40, 500)};
    CHECK(compute_timings(s, std::nullopt, {}).page_load_time_ms == 540);
  }

  TEST_CASE("first paint: driver event passes through") {
    HarSession s;
    s.entries = {timed(0, 300, "text/html")};
    s.on_load_ms = 900;
    std::vector<PaintEvent> paints = {{"first-meaningful-paint", 100}, {"first-paint", 410}};
    Timings t = compute_timings(s, std::span<const PaintEvent>(paints), {});
    CHECK(t.first_paint_ms == 410);
    CHECK(t.fp_source == FpSource::DriverEvent);
  }

  TEST_CASE("first paint estimate: document plus stylesheets started before it finished") {
    HarSession s;
    s.entries = {timed(0, 200, "text/html"), timed(150, 100, "text/css"), timed(250, 400, "text/css"),
                 timed(100, 50, "application/javascript")};
    s.on_load_ms = 1000;
    Timings t = compute_timings(s, std::nullopt, {});
    CHECK(t.fp_source == FpSource::FallbackEstimate);
    CHECK(t.first_paint_ms == 250);
    // Critical set: document, every stylesheet, script started before FP.
    CHECK(t.tfvr_ms == 650);
  }

  TEST_CASE("TFVR counts images requested before first paint only") {
    HarSession s;
    s.entries = {timed(0, 100, "text/html"), timed(50, 700, "image/jpeg"), timed(300, 900, "image/jpeg")};
    s.on_load_ms = 2000;
    std::vector<PaintEvent> paints = {{"first-contentful-paint", 200}};
    Timings t = compute_timings(s, std::span<const PaintEvent>(paints), {});
    CHECK(t.tfvr_ms == 750);
  }

  TEST_CASE("no entries and no load event is an empty session") {
    HarSession s;
    CHECK_THROWS_AS(compute_timings(s, std::nullopt, {}), Error);
    try {
      compute_timings(s, std::nullopt, {});
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptySession);
    }
  }

  TEST_CASE("timing invariants on generated sessions") {
    testsupport::Rng rng(4242);
    for (int i = 0; i < 300; ++i) {
      HarSession s = testsupport::random_session(rng, 50, i % 5 == 0);
      if (s.entries.empty() && !s.on_load_ms) continue;
      auto paints = testsupport::random_paints(rng, s.on_load_ms.value_or(0));
      auto events = i % 2 ? std::optional<std::span<const PaintEvent>>(paints) : std::nullopt;
      Timings t = compute_timings(s, events, {});
      std::vector<Interval> ivs;
      for (const auto& e : s.entries) ivs.push_back({e.start_offset_ms, e.total_time_ms});
      REQUIRE(std::abs(t.network_busy_ms - testsupport::occupancy_scan_busy_ms(ivs, t.page_load_time_ms)) <= 0.2);
      CHECK(t.processing_time_ms == doctest::Approx(t.page_load_time_ms - t.network_busy_ms));
      CHECK(t.processing_time_ms >= 0);
      CHECK(t.network_busy_ms <= t.page_load_time_ms + 1e-9);
      if (t.tfvr_ms) CHECK(*t.tfvr_ms <= t.page_load_time_ms);
      if (t.tfvr_ms && t.first_paint_ms) CHECK(*t.first_paint_ms <= *t.tfvr_ms);
    }
  }

  TEST_CASE("adding an entry never lowers entry-derived PLT or busy time") {
    testsupport::Rng rng(99);
    for (int i = 0; i < 100; ++i) {
      HarSession s = testsupport::random_session(rng, 30, true);
      if (s.entries.empty()) continue;
      Timings before = compute_timings(s, std::nullopt, {});
      s.entries.push_back(timed(testsupport::uniform(rng, 0, 5000), testsupport::uniform(rng, 0, 800)));
      Timings after = compute_timings(s, std::nullopt, {});
      CHECK(after.page_load_time_ms >= before.page_load_time_ms);
      CHECK(after.network_busy_ms >= before.network_busy_ms - 1e-9);
    }
  }

  TEST_CASE("MIME classes") {
    CHECK(classify_mime("text/html; charset=utf-8") == MimeClass::Document);
    CHECK(classify_mime("application/javascript") == MimeClass::Script);
    CHECK(classify_mime("text/javascript") == MimeClass::Script);
    CHECK(classify_mime("text/css") == MimeClass::Stylesheet);
    CHECK(classify_mime("image/webp") == MimeClass::Image);
    CHECK(classify_mime("font/woff2") == MimeClass::Font);
    CHECK(classify_mime("application/font-woff") == MimeClass::Font);
    CHECK(classify_mime("video/mp4") == MimeClass::Media);
    CHECK(classify_mime("audio/mpeg") == MimeClass::Media);
    CHECK(classify_mime("application/json") == MimeClass::Other);
    CHECK(classify_mime("") == MimeClass::Other);
  }

  TEST_CASE("56 resources over 8 registrable domains") {
    HarSession s = parse_har(read_file(testsupport::fixture_path("youtube/youtube.com.har")));
    ResourceStats st = resource_stats(s);
    CHECK(st.resource_count == 56);
    CHECK(st.domain_count == 8);
    CHECK(st.https_fraction == 1.0);
  }

  TEST_CASE("empty session gives all-zero stats") { CHECK(resource_stats(HarSession{}) == ResourceStats{}); }

  TEST_CASE("stats agree with a linear scan") {
    testsupport::Rng rng(40);
    for (int i = 0; i < 60; ++i) {
      HarSession s = testsupport::random_session(rng, 40);
      ResourceStats st = resource_stats(s);
      long long count = 0, aborted = 0, body = 0, transfer = 0, https = 0, class_sum = 0;
      std::set<std::string> domains;
      for (const auto& e : s.entries) {
        if (e.status <= 0) {
          ++aborted;
          continue;
        }
        ++count;
        body += std::max(e.body_size_bytes, 0LL);
        transfer += std::max(e.transfer_size_bytes, 0LL);
        https += e.url.rfind("https://", 0) == 0;
        domains.insert(registrable_domain(url_host(e.url)));
      }
      for (const auto& c : st.per_mime_class) class_sum += c.count;
      CHECK(st.resource_count == count);
      CHECK(st.aborted_count == aborted);
      CHECK(st.total_body_bytes == body);
      CHECK(st.total_transfer_bytes == transfer);
      CHECK(st.domain_count == static_cast<long long>(domains.size()));
      CHECK(class_sum == count);
      CHECK(st.https_fraction == doctest::Approx(count ? static_cast<double>(https) / count : 0.0));
    }
  }
}
