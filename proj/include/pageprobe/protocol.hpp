#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "pageprobe/domain.hpp"
#include "pageprobe/har.hpp"

namespace pageprobe {

enum class RequestedProtocol { H1, H2, QUIC, H2_REPEAT, QUIC_REPEAT };
enum class ObservedProtocol { H1, H2, QUIC, OTHER };
inline constexpr size_t kObservedProtocolCount = 4;

std::string_view to_string(RequestedProtocol p);
std::string_view to_string(ObservedProtocol p);
std::optional<RequestedProtocol> requested_protocol_from_string(std::string_view s);
std::optional<ObservedProtocol> observed_protocol_from_string(std::string_view s);

// Protocol switches requested from the browser. The fallback from H2 to
// HTTP/1.1 is left to the browser; no switch is emitted for it.
struct ProtocolPolicy {
  RequestedProtocol requested = RequestedProtocol::H2;
  bool h2_enabled = true;
  bool quic_enabled = false;
  bool repeat = false;

  static ProtocolPolicy for_requested(RequestedProtocol requested);

  bool valid() const;

  bool operator==(const ProtocolPolicy&) const = default;
};

struct DriverSettings {
  bool h2_enabled = true;
  bool quic_enabled = false;
  // Warm-up navigation, browser restart, resource cache cleared, DNS cache kept.
  bool two_pass = false;
  bool clear_resource_cache = true;
  bool keep_dns_cache_between_passes = false;

  // Chromium command-line switches that realize these settings.
  std::vector<std::string> chromium_switches() const;

  bool operator==(const DriverSettings&) const = default;
};

// Throws Error(InvalidPolicy) when the policy breaks its invariants.
DriverSettings policy_settings(const ProtocolPolicy& policy);

ObservedProtocol normalize_protocol(std::string_view http_version_raw);

struct ProtocolDistribution {
  std::array<long long, kObservedProtocolCount> counts{};
  std::array<double, kObservedProtocolCount> fractions{};

  long long count(ObservedProtocol p) const { return counts[static_cast<size_t>(p)]; }
  double fraction(ObservedProtocol p) const { return fractions[static_cast<size_t>(p)]; }
  long long total() const;

  // Recomputes fractions from counts.
  void normalize();

  bool operator==(const ProtocolDistribution&) const = default;
};

ProtocolDistribution protocol_distribution(const HarSession& session);

std::set<std::string> quic_enabled_domains(const HarSession& session,
                                           const PublicSuffixList& suffixes = PublicSuffixList::bundled());

}  // namespace pageprobe
