#include "pageprobe/delivery.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <set>

#include "pageprobe/error.hpp"

namespace pageprobe {

extern const char kBundledProviderMap[];

std::string_view to_string(CacheVerdict v) {
  switch (v) {
    case CacheVerdict::HIT: return "HIT";
    case CacheVerdict::MISS: return "MISS";
    case CacheVerdict::OTHER: return "OTHER";
  }
  return "OTHER";
}

std::string_view to_string(OriginClass c) {
  switch (c) {
    case OriginClass::SameOrigin: return "SameOrigin";
    case OriginClass::NonOrigin: return "NonOrigin";
    case OriginClass::Unknown: return "Unknown";
  }
  return "Unknown";
}

std::optional<OriginClass> origin_class_from_string(std::string_view s) {
  for (auto c : {OriginClass::SameOrigin, OriginClass::NonOrigin, OriginClass::Unknown}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

namespace {

std::vector<std::string> comma_tokens(std::string_view value) {
  std::vector<std::string> out;
  for (const auto& tok : split(value, ',')) {
    std::string_view t = trim(tok);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

CacheVerdict classify_token(std::string_view token) {
  if (istarts_with(token, "HIT")) return CacheVerdict::HIT;
  if (istarts_with(token, "MISS")) return CacheVerdict::MISS;
  return CacheVerdict::OTHER;
}

// Non-comment, non-blank lines split on tabs.
std::vector<std::vector<std::string>> tsv_rows(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  for (auto line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || trim(line).front() == '#') continue;
    rows.push_back(split(line, '\t'));
  }
  return rows;
}

template <typename Row>
const Row* longest_prefix(const std::vector<Row>& rows, std::string_view ip) {
  const Row* best = nullptr;
  for (const auto& row : rows) {
    if (row.first.contains(ip) && (!best || row.first.length() > best->first.length())) best = &row;
  }
  return best;
}

std::optional<std::string> non_empty(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  return std::string(s);
}

}  // namespace

// ---------------------------------------------------------------------------

CacheHeaderRegistry CacheHeaderRegistry::defaults() {
  CacheHeaderRegistry r;
  r.verdict_headers = {"X-App-Cache", "X-Cache", "X-Cache-Status", "CF-Cache-Status", "Via"};
  return r;
}

CacheChain parse_cache_chain(const HeaderMap& headers, const CacheHeaderRegistry& registry) {
  std::vector<std::string> labels;
  if (!registry.label_header.empty()) {
    for (auto value : headers.all(registry.label_header)) {
      for (auto& tok : comma_tokens(value)) labels.push_back(std::move(tok));
    }
  }
  CacheChain chain;
  for (const auto& name : registry.verdict_headers) {
    size_t label_index = 0;
    const bool labelled = iequals(name, registry.label_target);
    for (auto value : headers.all(name)) {
      for (auto& tok : comma_tokens(value)) {
        CacheHop hop;
        hop.verdict = classify_token(tok);
        hop.source_header = name;
        if (labelled && label_index < labels.size()) hop.server_label = labels[label_index];
        if (labelled) ++label_index;
        chain.hops.push_back(std::move(hop));
      }
    }
  }
  return chain;
}

DeliveringHop delivering_hop(const CacheChain& chain) {
  for (auto it = chain.hops.rbegin(); it != chain.hops.rend(); ++it) {
    if (it->verdict == CacheVerdict::HIT) return {true, it->server_label};
  }
  for (auto it = chain.hops.rbegin(); it != chain.hops.rend(); ++it) {
    if (it->server_label) return {false, it->server_label};
  }
  return {};
}

// ---------------------------------------------------------------------------

TableWhois TableWhois::from_text(std::string_view text) {
  TableWhois t;
  for (const auto& cols : tsv_rows(text)) {
    auto prefix = IpPrefix::parse(cols[0]);
    if (!prefix || cols.size() < 2) throw Error(ErrorCode::ConfigError, "bad WHOIS row: " + cols[0]);
    t.add(*prefix, std::string(trim(cols[1])));
  }
  return t;
}

TableWhois TableWhois::from_file(const std::string& path) { return from_text(read_file(path)); }

void TableWhois::add(IpPrefix prefix, std::string assignee) { rows_.emplace_back(prefix, std::move(assignee)); }

std::optional<std::string> TableWhois::assignee(std::string_view ip) const {
  if (const auto* row = longest_prefix(rows_, ip)) return row->second;
  return std::nullopt;
}

std::optional<std::string> UnavailableWhois::assignee(std::string_view ip) const {
  throw Error(ErrorCode::WhoisUnavailable, "no WHOIS source configured for " + std::string(ip));
}

ProviderMap ProviderMap::from_text(std::string_view text) {
  ProviderMap m;
  for (const auto& cols : tsv_rows(text)) {
    if (cols.size() < 2) throw Error(ErrorCode::ConfigError, "bad provider_map row: " + cols[0]);
    m.rows_.emplace_back(to_lower(trim(cols[0])), std::string(trim(cols[1])));
  }
  return m;
}

ProviderMap ProviderMap::from_file(const std::string& path) { return from_text(read_file(path)); }

const ProviderMap& ProviderMap::bundled() {
  static const ProviderMap map = from_text(kBundledProviderMap);
  return map;
}

std::optional<std::string> ProviderMap::match(std::string_view assignee) const {
  std::string lower = to_lower(assignee);
  for (const auto& [needle, canonical] : rows_) {
    if (lower.find(needle) != std::string::npos) return canonical;
  }
  return std::nullopt;
}

ProviderCache::ProviderCache(std::chrono::seconds validity, Clock clock)
    : validity_(validity), clock_(std::move(clock)) {}

std::chrono::system_clock::time_point ProviderCache::now() const {
  return clock_ ? clock_() : std::chrono::system_clock::now();
}

std::string ProviderCache::get_or_compute(const std::string& key, const std::function<std::string()>& compute) {
  std::promise<std::string> promise;
  std::shared_future<std::string> pending;
  bool owner = false;
  {
    std::lock_guard lock(mu_);
    auto it = slots_.find(key);
    if (it != slots_.end() && now() - it->second.stamped < validity_) {
      pending = it->second.value;
    } else {
      pending = promise.get_future().share();
      slots_[key] = Slot{pending, now()};
      owner = true;
    }
  }
  if (!owner) return pending.get();
  try {
    std::string value = compute();
    promise.set_value(value);
    return value;
  } catch (...) {
    promise.set_exception(std::current_exception());
    std::lock_guard lock(mu_);
    slots_.erase(key);
    throw;
  }
}

size_t ProviderCache::size() const {
  std::lock_guard lock(mu_);
  return slots_.size();
}

void ProviderCache::clear() {
  std::lock_guard lock(mu_);
  slots_.clear();
}

std::string identify_provider(std::string_view server_ip, const WhoisClient& whois, const ProviderMap& provider_map,
                              ProviderCache* cache) {
  if (is_non_routable(server_ip)) return std::string(kNoCdn);
  auto lookup = [&]() -> std::string {
    auto assignee = whois.assignee(server_ip);
    if (!assignee) return std::string(kNoCdn);
    return provider_map.match(*assignee).value_or(std::string(kNoCdn));
  };
  try {
    if (cache) return cache->get_or_compute(std::string(server_ip), lookup);
    return lookup();
  } catch (const std::exception&) {
    return std::string(kUnknownProvider);
  }
}

// ---------------------------------------------------------------------------

TableGeo TableGeo::from_text(std::string_view text) {
  TableGeo t;
  for (auto cols : tsv_rows(text)) {
    auto prefix = IpPrefix::parse(cols[0]);
    if (!prefix) throw Error(ErrorCode::ConfigError, "bad geo row: " + cols[0]);
    cols.resize(std::max<size_t>(cols.size(), 6));
    GeoLocation loc;
    loc.city = non_empty(cols[1]);
    if (auto c = non_empty(cols[2])) {
      std::string code = *c;
      for (auto& ch : code) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      loc.country = code;
    }
    if (auto c = non_empty(cols[3])) loc.continent = continent_from_string(*c);
    if (non_empty(cols[4]) && non_empty(cols[5])) {
      loc.coordinates = LatLon{std::strtod(cols[4].c_str(), nullptr), std::strtod(cols[5].c_str(), nullptr)};
    }
    t.add(*prefix, std::move(loc));
  }
  return t;
}

TableGeo TableGeo::from_file(const std::string& path) { return from_text(read_file(path)); }

void TableGeo::add(IpPrefix prefix, GeoLocation location) { rows_.emplace_back(prefix, std::move(location)); }

std::optional<GeoLocation> TableGeo::lookup(std::string_view ip) const {
  if (const auto* row = longest_prefix(rows_, ip)) return row->second;
  return std::nullopt;
}

GeoLocation geolocate(std::string_view server_ip, const GeoProvider& geo) {
  std::optional<GeoLocation> found;
  try {
    found = geo.lookup(server_ip);
  } catch (const std::exception&) {
    return {};
  }
  if (!found) return {};
  GeoLocation loc = *found;
  if (!loc.continent && loc.country) loc.continent = continent_of_country(*loc.country);
  // A continent without a country cannot be placed consistently.
  if (!loc.country) loc.continent.reset();
  return loc;
}

// ---------------------------------------------------------------------------

TableNsResolver TableNsResolver::from_text(std::string_view text) {
  TableNsResolver t;
  for (const auto& cols : tsv_rows(text)) {
    std::vector<std::string> ns;
    if (cols.size() > 1) ns = comma_tokens(cols[1]);
    t.add(std::string(trim(cols[0])), std::move(ns));
  }
  return t;
}

TableNsResolver TableNsResolver::from_file(const std::string& path) { return from_text(read_file(path)); }

void TableNsResolver::add(std::string domain, std::vector<std::string> ns) {
  rows_[to_lower(domain)] = std::move(ns);
}

std::vector<std::string> TableNsResolver::authoritative_ns(std::string_view domain) const {
  auto it = rows_.find(to_lower(domain));
  if (it == rows_.end()) throw Error(ErrorCode::ResolverFailure, "no NS data for " + std::string(domain));
  return it->second;
}

OriginClass classify_origin(std::string_view resource_domain, std::string_view homepage_domain, const NsResolver& dns,
                            const PublicSuffixList& suffixes) {
  if (iequals(resource_domain, homepage_domain)) return OriginClass::SameOrigin;
  auto ns_domains = [&](std::string_view domain) {
    std::set<std::string> out;
    for (const auto& host : dns.authoritative_ns(domain)) out.insert(registrable_domain(host, suffixes));
    return out;
  };
  std::set<std::string> resource_ns, homepage_ns;
  try {
    resource_ns = ns_domains(resource_domain);
    homepage_ns = ns_domains(homepage_domain);
  } catch (const std::exception&) {
    return OriginClass::Unknown;
  }
  if (resource_ns.empty() || homepage_ns.empty()) return OriginClass::Unknown;
  for (const auto& d : resource_ns) {
    if (homepage_ns.count(d)) return OriginClass::SameOrigin;
  }
  return OriginClass::NonOrigin;
}

// ---------------------------------------------------------------------------

DeliveryAttribution attribute_delivery(const HarEntry& entry, std::string_view homepage_domain,
                                       const DeliveryContext& ctx) {
  DeliveryAttribution a;
  DeliveringHop hop = delivering_hop(parse_cache_chain(entry.response_headers, ctx.registry));
  a.served_from_cache = hop.served_from_cache;
  a.delivering_server_label = hop.server_label;

  if (entry.server_ip && ctx.whois) {
    a.provider = identify_provider(*entry.server_ip, *ctx.whois, *ctx.provider_map, ctx.provider_cache);
  } else {
    a.provider = std::string(kUnknownProvider);
  }
  if (a.served_from_cache && a.provider == kNoCdn) a.provider = std::string(kUnknownCdn);

  if (entry.server_ip && ctx.geo) a.location = geolocate(*entry.server_ip, *ctx.geo);

  std::string resource_domain = registrable_domain(url_host(entry.url), *ctx.suffixes);
  if (ctx.dns) {
    a.origin_class = classify_origin(resource_domain, homepage_domain, *ctx.dns, *ctx.suffixes);
  } else if (!resource_domain.empty() && iequals(resource_domain, homepage_domain)) {
    a.origin_class = OriginClass::SameOrigin;
  }
  return a;
}

}  // namespace pageprobe
