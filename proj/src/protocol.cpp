#include "pageprobe/protocol.hpp"

#include <regex>

#include "pageprobe/error.hpp"

namespace pageprobe {

std::string_view to_string(RequestedProtocol p) {
  switch (p) {
    case RequestedProtocol::H1: return "H1";
    case RequestedProtocol::H2: return "H2";
    case RequestedProtocol::QUIC: return "QUIC";
    case RequestedProtocol::H2_REPEAT: return "H2_REPEAT";
    case RequestedProtocol::QUIC_REPEAT: return "QUIC_REPEAT";
  }
  return "H2";
}

std::string_view to_string(ObservedProtocol p) {
  switch (p) {
    case ObservedProtocol::H1: return "H1";
    case ObservedProtocol::H2: return "H2";
    case ObservedProtocol::QUIC: return "QUIC";
    case ObservedProtocol::OTHER: return "OTHER";
  }
  return "OTHER";
}

std::optional<RequestedProtocol> requested_protocol_from_string(std::string_view s) {
  for (auto p : {RequestedProtocol::H1, RequestedProtocol::H2, RequestedProtocol::QUIC, RequestedProtocol::H2_REPEAT,
                 RequestedProtocol::QUIC_REPEAT}) {
    if (iequals(to_string(p), s)) return p;
  }
  return std::nullopt;
}

std::optional<ObservedProtocol> observed_protocol_from_string(std::string_view s) {
  for (auto p : {ObservedProtocol::H1, ObservedProtocol::H2, ObservedProtocol::QUIC, ObservedProtocol::OTHER}) {
    if (iequals(to_string(p), s)) return p;
  }
  return std::nullopt;
}

ProtocolPolicy ProtocolPolicy::for_requested(RequestedProtocol requested) {
  ProtocolPolicy p;
  p.requested = requested;
  switch (requested) {
    case RequestedProtocol::H1: p.h2_enabled = false; p.quic_enabled = false; break;
    case RequestedProtocol::H2:
    case RequestedProtocol::H2_REPEAT: p.h2_enabled = true; p.quic_enabled = false; break;
    case RequestedProtocol::QUIC:
    case RequestedProtocol::QUIC_REPEAT: p.h2_enabled = true; p.quic_enabled = true; break;
  }
  p.repeat = requested == RequestedProtocol::H2_REPEAT || requested == RequestedProtocol::QUIC_REPEAT;
  return p;
}

bool ProtocolPolicy::valid() const { return *this == for_requested(requested); }

std::vector<std::string> DriverSettings::chromium_switches() const {
  std::vector<std::string> out;
  if (!h2_enabled) out.emplace_back("--disable-http2");
  out.emplace_back(quic_enabled ? "--enable-quic" : "--disable-quic");
  return out;
}

DriverSettings policy_settings(const ProtocolPolicy& policy) {
  if (!policy.valid()) {
    throw Error(ErrorCode::InvalidPolicy,
                "switches inconsistent with requested protocol " + std::string(to_string(policy.requested)));
  }
  DriverSettings s;
  s.h2_enabled = policy.h2_enabled;
  s.quic_enabled = policy.quic_enabled;
  s.two_pass = policy.repeat;
  s.clear_resource_cache = true;
  s.keep_dns_cache_between_passes = policy.repeat;
  return s;
}

ObservedProtocol normalize_protocol(std::string_view http_version_raw) {
  static const std::regex kH3(R"(h3(-[0-9]+)?)");
  std::string v = to_lower(trim(http_version_raw));
  if (v == "http/1.0" || v == "http/1.1") return ObservedProtocol::H1;
  if (v == "h2" || v == "http/2" || v == "http/2.0" || v == "h2c") return ObservedProtocol::H2;
  if (v.find("quic") != std::string::npos || std::regex_match(v, kH3)) return ObservedProtocol::QUIC;
  return ObservedProtocol::OTHER;
}

long long ProtocolDistribution::total() const {
  long long t = 0;
  for (auto c : counts) t += c;
  return t;
}

void ProtocolDistribution::normalize() {
  long long t = total();
  for (size_t i = 0; i < kObservedProtocolCount; ++i) {
    fractions[i] = t > 0 ? static_cast<double>(counts[i]) / static_cast<double>(t) : 0.0;
  }
}

ProtocolDistribution protocol_distribution(const HarSession& session) {
  ProtocolDistribution d;
  for (const auto& e : session.entries) {
    if (e.aborted()) continue;
    ++d.counts[static_cast<size_t>(normalize_protocol(e.http_version_raw))];
  }
  d.normalize();
  return d;
}

std::set<std::string> quic_enabled_domains(const HarSession& session, const PublicSuffixList& suffixes) {
  std::set<std::string> out;
  for (const auto& e : session.entries) {
    if (e.aborted() || normalize_protocol(e.http_version_raw) != ObservedProtocol::QUIC) continue;
    if (std::string host = url_host(e.url); !host.empty()) out.insert(registrable_domain(host, suffixes));
  }
  return out;
}

}  // namespace pageprobe
