#pragma once

#include <chrono>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pageprobe/domain.hpp"
#include "pageprobe/geo.hpp"
#include "pageprobe/har.hpp"
#include "pageprobe/util.hpp"

namespace pageprobe {

inline constexpr std::string_view kNoCdn = "No CDN";
inline constexpr std::string_view kUnknownProvider = "Unknown";
inline constexpr std::string_view kUnknownCdn = "Unknown-CDN";

// ---------------------------------------------------------------------------
// Cache chains

enum class CacheVerdict { HIT, MISS, OTHER };

std::string_view to_string(CacheVerdict v);

struct CacheHop {
  CacheVerdict verdict = CacheVerdict::OTHER;
  std::optional<std::string> server_label;
  std::string source_header;

  bool operator==(const CacheHop&) const = default;
};

struct CacheChain {
  std::vector<CacheHop> hops;

  bool operator==(const CacheChain&) const = default;
};

// Which response headers carry cache verdicts, in scan order. The label
// header does not produce hops; its comma-separated entries are aligned by
// index with the hops of label_target.
struct CacheHeaderRegistry {
  std::vector<std::string> verdict_headers;
  std::string label_header = "X-Served-By";
  std::string label_target = "X-Cache";

  // X-App-Cache, X-Cache, X-Cache-Status, CF-Cache-Status, Via.
  static CacheHeaderRegistry defaults();
};

CacheChain parse_cache_chain(const HeaderMap& headers,
                             const CacheHeaderRegistry& registry = CacheHeaderRegistry::defaults());

struct DeliveringHop {
  bool served_from_cache = false;
  std::optional<std::string> server_label;

  bool operator==(const DeliveringHop&) const = default;
};

// The last HIT hop delivered the bytes. Without any HIT the result carries
// the label of the last labelled hop.
DeliveringHop delivering_hop(const CacheChain& chain);

// ---------------------------------------------------------------------------
// Provider identification

class WhoisClient {
 public:
  virtual ~WhoisClient() = default;
  // Registered assignee of the block containing ip; nullopt when unregistered.
  // Throws Error(WhoisUnavailable) when the service cannot answer.
  virtual std::optional<std::string> assignee(std::string_view ip) const = 0;
};

// Offline WHOIS backed by `ip_prefix<TAB>assignee` lines; longest prefix wins.
class TableWhois final : public WhoisClient {
 public:
  static TableWhois from_text(std::string_view text);
  static TableWhois from_file(const std::string& path);

  void add(IpPrefix prefix, std::string assignee);
  std::optional<std::string> assignee(std::string_view ip) const override;

 private:
  std::vector<std::pair<IpPrefix, std::string>> rows_;
};

// Stand-in used when no WHOIS source is configured: every query is unavailable.
class UnavailableWhois final : public WhoisClient {
 public:
  std::optional<std::string> assignee(std::string_view ip) const override;
};

// `substring<TAB>canonical_name` rows, matched case-insensitively in file order.
class ProviderMap {
 public:
  static ProviderMap from_text(std::string_view text);
  static ProviderMap from_file(const std::string& path);
  static const ProviderMap& bundled();

  std::optional<std::string> match(std::string_view assignee) const;
  const std::vector<std::pair<std::string, std::string>>& rows() const { return rows_; }

 private:
  std::vector<std::pair<std::string, std::string>> rows_;
};

// Per-IP provider results with a validity period. Concurrent lookups of the
// same key run the computation once; the others wait for its result.
class ProviderCache {
 public:
  using Clock = std::function<std::chrono::system_clock::time_point()>;

  static constexpr std::chrono::hours kDefaultValidity{24 * 7};

  explicit ProviderCache(std::chrono::seconds validity = kDefaultValidity, Clock clock = nullptr);

  // Cached value for key, or the result of compute(). A compute() that throws
  // leaves nothing cached and rethrows to every waiter.
  std::string get_or_compute(const std::string& key, const std::function<std::string()>& compute);

  size_t size() const;
  void clear();

 private:
  struct Slot {
    std::shared_future<std::string> value;
    std::chrono::system_clock::time_point stamped;
  };

  std::chrono::system_clock::time_point now() const;

  std::chrono::seconds validity_;
  Clock clock_;
  mutable std::mutex mu_;
  std::map<std::string, Slot> slots_;
};

// WHOIS assignee of server_ip mapped through provider_map. Non-routable
// addresses skip WHOIS and yield "No CDN"; unmapped assignees yield "No CDN";
// an unavailable WHOIS yields "Unknown" and is not cached.
std::string identify_provider(std::string_view server_ip, const WhoisClient& whois, const ProviderMap& provider_map,
                              ProviderCache* cache = nullptr);

// ---------------------------------------------------------------------------
// Geolocation

struct GeoLocation {
  std::optional<std::string> city;
  std::optional<std::string> country;
  std::optional<Continent> continent;
  std::optional<LatLon> coordinates;

  bool operator==(const GeoLocation&) const = default;
};

class GeoProvider {
 public:
  virtual ~GeoProvider() = default;
  virtual std::optional<GeoLocation> lookup(std::string_view ip) const = 0;
};

// `ip_prefix<TAB>city<TAB>country<TAB>continent[<TAB>lat<TAB>lon]`; empty
// columns are absent values. Longest prefix wins.
class TableGeo final : public GeoProvider {
 public:
  static TableGeo from_text(std::string_view text);
  static TableGeo from_file(const std::string& path);

  void add(IpPrefix prefix, GeoLocation location);
  std::optional<GeoLocation> lookup(std::string_view ip) const override;

 private:
  std::vector<std::pair<IpPrefix, GeoLocation>> rows_;
};

// Continent is derived from the country when the provider omits it.
GeoLocation geolocate(std::string_view server_ip, const GeoProvider& geo);

// ---------------------------------------------------------------------------
// Origin classification

enum class OriginClass { SameOrigin, NonOrigin, Unknown };

std::string_view to_string(OriginClass c);
std::optional<OriginClass> origin_class_from_string(std::string_view s);

class NsResolver {
 public:
  virtual ~NsResolver() = default;
  // Authoritative name server hostnames of domain. Throws
  // Error(ResolverFailure) on timeout or when the domain cannot be resolved.
  virtual std::vector<std::string> authoritative_ns(std::string_view domain) const = 0;
};

// `domain<TAB>ns1,ns2,...`; domains missing from the table fail to resolve.
class TableNsResolver final : public NsResolver {
 public:
  static TableNsResolver from_text(std::string_view text);
  static TableNsResolver from_file(const std::string& path);

  void add(std::string domain, std::vector<std::string> ns);
  std::vector<std::string> authoritative_ns(std::string_view domain) const override;

 private:
  std::map<std::string, std::vector<std::string>> rows_;
};

// Queries the system resolver for NS records.
class SystemNsResolver final : public NsResolver {
 public:
  std::vector<std::string> authoritative_ns(std::string_view domain) const override;
};

OriginClass classify_origin(std::string_view resource_domain, std::string_view homepage_domain, const NsResolver& dns,
                            const PublicSuffixList& suffixes = PublicSuffixList::bundled());

// ---------------------------------------------------------------------------
// Attribution

struct DeliveryAttribution {
  std::string provider{kNoCdn};
  std::optional<std::string> delivering_server_label;
  bool served_from_cache = false;
  GeoLocation location;
  OriginClass origin_class = OriginClass::Unknown;

  bool operator==(const DeliveryAttribution&) const = default;
};

// Everything attribution needs besides the entry itself. The referenced
// clients must outlive the context and be safe to share across threads.
struct DeliveryContext {
  const WhoisClient* whois = nullptr;
  const GeoProvider* geo = nullptr;
  const NsResolver* dns = nullptr;
  CacheHeaderRegistry registry = CacheHeaderRegistry::defaults();
  const ProviderMap* provider_map = &ProviderMap::bundled();
  const PublicSuffixList* suffixes = &PublicSuffixList::bundled();
  ProviderCache* provider_cache = nullptr;
};

DeliveryAttribution attribute_delivery(const HarEntry& entry, std::string_view homepage_domain,
                                       const DeliveryContext& ctx);

}  // namespace pageprobe
