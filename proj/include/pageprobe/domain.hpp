#pragma once

#include <string>
#include <string_view>
#include <unordered_set>

namespace pageprobe {

// Public-suffix rule set in the publicsuffix.org list format: one rule per
// line, `//` comments, `*.` wildcard rules and `!` exception rules.
class PublicSuffixList {
 public:
  PublicSuffixList() = default;

  static PublicSuffixList from_text(std::string_view text);
  static PublicSuffixList from_file(const std::string& path);
  // The rule set compiled into the library from data/public_suffix.dat.
  static const PublicSuffixList& bundled();

  // Public suffix of a lowercased hostname, using the implicit "*" rule when
  // nothing matches.
  std::string public_suffix(std::string_view hostname) const;

  size_t rule_count() const { return exact_.size() + wildcard_.size() + exception_.size(); }

 private:
  std::unordered_set<std::string> exact_;
  std::unordered_set<std::string> wildcard_;   // stored without the "*." prefix
  std::unordered_set<std::string> exception_;  // stored without the "!" prefix
};

// Public suffix plus one label. IP literals and hostnames that are themselves
// public suffixes come back unchanged (lowercased, trailing dot removed), which
// keeps the function idempotent.
std::string registrable_domain(std::string_view hostname, const PublicSuffixList& rules);
std::string registrable_domain(std::string_view hostname);

}  // namespace pageprobe
