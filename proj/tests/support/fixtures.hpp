#pragma once

#include <cstdlib>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "pageprobe/config.hpp"
#include "pageprobe/delivery.hpp"
#include "pageprobe/util.hpp"

#ifndef PAGEPROBE_FIXTURE_DIR
#error "PAGEPROBE_FIXTURE_DIR must point at tests/fixtures"
#endif

namespace testsupport {

inline std::string fixture_path(const std::string& relative) {
  return (std::filesystem::path(PAGEPROBE_FIXTURE_DIR) / relative).string();
}

// Lookup tables of one fixture directory (whois.tsv, geo.tsv, ns.tsv).
struct FixtureTables {
  explicit FixtureTables(const std::string& name)
      : whois(pageprobe::TableWhois::from_file(fixture_path(name + "/whois.tsv"))),
        geo(pageprobe::TableGeo::from_file(fixture_path(name + "/geo.tsv"))),
        dns(pageprobe::TableNsResolver::from_file(fixture_path(name + "/ns.tsv"))),
        config(pageprobe::load_campaign_config(fixture_path(name + "/config.json"))) {}

  pageprobe::DeliveryContext context() const {
    pageprobe::DeliveryContext ctx;
    ctx.whois = &whois;
    ctx.geo = &geo;
    ctx.dns = &dns;
    return ctx;
  }

  pageprobe::TableWhois whois;
  pageprobe::TableGeo geo;
  pageprobe::TableNsResolver dns;
  pageprobe::CampaignConfig config;
};

// A scratch directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline TempDir::TempDir() {
  std::string pattern = (std::filesystem::temp_directory_path() / "pageprobe-test-XXXXXX").string();
  if (!::mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
  path_ = pattern;
}

inline TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace testsupport
