#include "pageprobe/config.hpp"

#include <charconv>
#include <filesystem>

#include <json.hpp>

#include "pageprobe/error.hpp"

namespace pageprobe {

using nlohmann::json;

std::string_view to_string(AccessNetwork n) {
  switch (n) {
    case AccessNetwork::Fiber: return "Fiber";
    case AccessNetwork::ADSL: return "ADSL";
    case AccessNetwork::WiFi: return "WiFi";
  }
  return "Fiber";
}

std::optional<AccessNetwork> access_network_from_string(std::string_view s) {
  for (auto n : {AccessNetwork::Fiber, AccessNetwork::ADSL, AccessNetwork::WiFi}) {
    if (iequals(to_string(n), s)) return n;
  }
  return std::nullopt;
}

std::optional<Viewport> parse_window(std::string_view text) {
  text = trim(text);
  size_t x = text.find_first_of("xX");
  if (x == std::string_view::npos) return std::nullopt;
  Viewport v;
  auto w = text.substr(0, x), h = text.substr(x + 1);
  if (std::from_chars(w.data(), w.data() + w.size(), v.width).ptr != w.data() + w.size() ||
      std::from_chars(h.data(), h.data() + h.size(), v.height).ptr != h.data() + h.size() || w.empty() || h.empty()) {
    return std::nullopt;
  }
  return v;
}

std::string to_string(Viewport v) { return std::to_string(v.width) + "x" + std::to_string(v.height); }

void SessionConfig::validate() const {
  if (!(timeout_ms > 0)) throw Error(ErrorCode::ConfigError, "timeout_ms must be positive");
  if (window.width <= 0 || window.height <= 0) throw Error(ErrorCode::ConfigError, "window must be positive");
  if (!policy.valid()) throw Error(ErrorCode::InvalidPolicy, "inconsistent protocol policy");
}

CampaignConfig parse_campaign_config(std::string_view json_text, const std::string& base_dir) {
  json doc = json::parse(json_text.begin(), json_text.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Error(ErrorCode::ConfigError, "config is not a JSON object");

  CampaignConfig cfg;
  SessionConfig& s = cfg.session;
  try {
    if (auto it = doc.find("browser"); it != doc.end()) {
      if (it->is_string()) {
        s.browser.name = it->get<std::string>();
      } else {
        s.browser.name = it->value("name", s.browser.name);
        s.browser.version = it->value("version", "");
      }
    }
    if (auto it = doc.find("policy"); it != doc.end()) {
      auto requested = requested_protocol_from_string(it->get<std::string>());
      if (!requested) throw Error(ErrorCode::ConfigError, "unknown policy " + it->get<std::string>());
      s.policy = ProtocolPolicy::for_requested(*requested);
    }
    if (auto it = doc.find("window"); it != doc.end()) {
      if (it->is_string()) {
        auto v = parse_window(it->get<std::string>());
        if (!v) throw Error(ErrorCode::ConfigError, "bad window " + it->get<std::string>());
        s.window = *v;
      } else {
        s.window.width = it->value("width", s.window.width);
        s.window.height = it->value("height", s.window.height);
      }
    }
    s.adblock = doc.value("adblock", false);
    s.timeout_ms = doc.value("timeout_ms", kDefaultTimeoutMs);
    if (auto it = doc.find("probe"); it != doc.end()) {
      s.probe.id = it->value("id", s.probe.id);
      s.probe.city = it->value("city", "");
      s.probe.country = it->value("country", "");
      s.probe.network_operator = it->value("operator", "");
      if (it->contains("access_network")) {
        auto n = access_network_from_string((*it)["access_network"].get<std::string>());
        if (!n) throw Error(ErrorCode::ConfigError, "unknown access_network");
        s.probe.access_network = *n;
      }
    }
    if (auto it = doc.find("websites"); it != doc.end()) {
      cfg.websites = it->get<std::vector<std::string>>();
    } else if (auto f = doc.find("websites_file"); f != doc.end()) {
      std::filesystem::path p = f->get<std::string>();
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      for (const auto& line : split(read_file(p.string()), '\n')) {
        std::string_view url = trim(line);
        if (!url.empty() && url.front() != '#') cfg.websites.emplace_back(url);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  s.validate();
  return cfg;
}

CampaignConfig load_campaign_config(const std::string& path) {
  auto base = std::filesystem::path(path).parent_path().string();
  return parse_campaign_config(read_file(path), base.empty() ? "." : base);
}

}  // namespace pageprobe
