#include "pageprobe/domain.hpp"

#include <vector>

#include "pageprobe/util.hpp"

namespace pageprobe {

extern const char kBundledPublicSuffixList[];

namespace {

std::string join_from(const std::vector<std::string>& labels, size_t first) {
  std::string out;
  for (size_t i = first; i < labels.size(); ++i) {
    if (!out.empty()) out += '.';
    out += labels[i];
  }
  return out;
}

std::string normalize_host(std::string_view hostname) {
  std::string_view h = trim(hostname);
  if (h.size() >= 2 && h.front() == '[' && h.back() == ']') h = h.substr(1, h.size() - 2);
  std::string out = to_lower(h);
  while (!out.empty() && out.back() == '.') out.pop_back();
  return out;
}

}  // namespace

PublicSuffixList PublicSuffixList::from_text(std::string_view text) {
  PublicSuffixList list;
  for (const auto& raw : split(text, '\n')) {
    std::string_view line = trim(raw);
    if (line.empty() || line.substr(0, 2) == "//") continue;
    // Rules end at the first whitespace.
    line = line.substr(0, line.find_first_of(" \t"));
    std::string rule = to_lower(line);
    if (rule.front() == '!') {
      list.exception_.insert(rule.substr(1));
    } else if (rule.size() > 2 && rule.compare(0, 2, "*.") == 0) {
      list.wildcard_.insert(rule.substr(2));
    } else {
      list.exact_.insert(rule);
    }
  }
  return list;
}

PublicSuffixList PublicSuffixList::from_file(const std::string& path) { return from_text(read_file(path)); }

const PublicSuffixList& PublicSuffixList::bundled() {
  static const PublicSuffixList list = from_text(kBundledPublicSuffixList);
  return list;
}

std::string PublicSuffixList::public_suffix(std::string_view hostname) const {
  std::string host = normalize_host(hostname);
  std::vector<std::string> labels = split(host, '.');
  const size_t n = labels.size();
  for (size_t i = 0; i < n; ++i) {
    if (exception_.count(join_from(labels, i))) return join_from(labels, i + 1);
  }
  for (size_t i = 0; i < n; ++i) {
    if (exact_.count(join_from(labels, i))) return join_from(labels, i);
    if (i + 1 < n && wildcard_.count(join_from(labels, i + 1))) return join_from(labels, i);
  }
  return labels.back();
}

std::string registrable_domain(std::string_view hostname, const PublicSuffixList& rules) {
  std::string host = normalize_host(hostname);
  if (host.empty() || is_ip_literal(host)) return host;
  std::string suffix = rules.public_suffix(host);
  if (suffix.size() >= host.size()) return host;
  // host = <prefix>.<suffix>; keep the last label of the prefix.
  std::string_view prefix(host.data(), host.size() - suffix.size() - 1);
  size_t dot = prefix.rfind('.');
  return host.substr(dot == std::string_view::npos ? 0 : dot + 1);
}

std::string registrable_domain(std::string_view hostname) {
  return registrable_domain(hostname, PublicSuffixList::bundled());
}

}  // namespace pageprobe
