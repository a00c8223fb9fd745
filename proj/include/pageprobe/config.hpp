#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pageprobe/metrics.hpp"
#include "pageprobe/protocol.hpp"

namespace pageprobe {

enum class AccessNetwork { Fiber, ADSL, WiFi };

std::string_view to_string(AccessNetwork n);
std::optional<AccessNetwork> access_network_from_string(std::string_view s);

struct ProbeIdentity {
  std::string id = "probe-0";
  std::string city;
  std::string country;
  AccessNetwork access_network = AccessNetwork::Fiber;
  std::string network_operator;

  bool operator==(const ProbeIdentity&) const = default;
};

struct BrowserInfo {
  std::string name = "Chrome";
  std::string version;

  bool operator==(const BrowserInfo&) const = default;
};

inline constexpr double kDefaultTimeoutMs = 18000.0;

struct SessionConfig {
  BrowserInfo browser;
  ProtocolPolicy policy = ProtocolPolicy::for_requested(RequestedProtocol::H2);
  Viewport window;
  bool adblock = false;
  double timeout_ms = kDefaultTimeoutMs;
  ProbeIdentity probe;

  // Throws Error(ConfigError) for a non-positive timeout or window, and
  // Error(InvalidPolicy) for an inconsistent policy.
  void validate() const;
};

// Campaign configuration document:
//
//   {
//     "browser": {"name": "Chrome", "version": "75"},
//     "policy": "QUIC_REPEAT",
//     "window": {"width": 1440, "height": 900},     // or "1440x900"
//     "adblock": false,
//     "timeout_ms": 18000,
//     "probe": {"id": "lannion-1", "city": "Lannion", "country": "FR",
//               "access_network": "Fiber", "operator": "Orange"},
//     "websites": ["https://www.youtube.com/"]      // or "websites_file": "top50.txt"
//   }
//
// A relative websites_file is resolved against base_dir.
struct CampaignConfig {
  SessionConfig session;
  std::vector<std::string> websites;
};

CampaignConfig parse_campaign_config(std::string_view json_text, const std::string& base_dir = ".");
CampaignConfig load_campaign_config(const std::string& path);

// "1440x900"
std::optional<Viewport> parse_window(std::string_view text);
std::string to_string(Viewport v);

}  // namespace pageprobe
