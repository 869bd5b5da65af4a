#include "agentrec/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include "agentrec/text.hpp"

namespace agentrec {

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "provider.kind", "provider.dim",     "provider.seed",     "provider.endpoint",
      "provider.timeout_ms", "rephrase.kind", "rephrase.endpoint", "rephrase.timeout_ms",
      "score.kind",    "score.p",          "score.epsilon",     "cache_path",
      "listen_address", "default_k",
  };
  return keys;
}

namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const std::string& why) {
  throw Error(ErrorCode::invalid_configuration,
              "config key '" + std::string(key) + "': bad value '" + std::string(value) + "' (" + why + ")");
}

template <typename T>
T parse_integer(std::string_view key, std::string_view value) {
  const std::string s(value);
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used, 10);
    if (used != s.size()) bad_value(key, value, "not an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v < 0) bad_value(key, value, "must be non-negative");
    }
    return static_cast<T>(v);
  } catch (const std::logic_error&) {
    // stoll rejects values above LLONG_MAX; seeds may need the full u64 range.
    if constexpr (std::is_same_v<T, std::uint64_t>) {
      try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(s, &used, 10);
        if (used == s.size() && !s.starts_with('-')) return v;
      } catch (const std::logic_error&) {
      }
    }
    bad_value(key, value, "not an integer");
  }
}

double parse_real(std::string_view key, std::string_view value) {
  const std::string s(value);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) bad_value(key, value, "not a number");
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, value, "not a number");
  }
}

}  // namespace

void set_config_value(EngineConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "provider.kind") {
    if (value == "deterministic-hash" || value == "hash") {
      cfg.provider.kind = ProviderKind::deterministic_hash;
    } else if (value == "remote-http" || value == "remote") {
      cfg.provider.kind = ProviderKind::remote_http;
    } else {
      bad_value(key, value, "expected deterministic-hash or remote-http");
    }
  } else if (key == "provider.dim") {
    cfg.provider.dim = parse_integer<int>(key, value);
  } else if (key == "provider.seed") {
    cfg.provider.seed = parse_integer<std::uint64_t>(key, value);
  } else if (key == "provider.endpoint") {
    cfg.provider.endpoint = std::string(value);
  } else if (key == "provider.timeout_ms") {
    cfg.provider.timeout = std::chrono::milliseconds(parse_integer<long long>(key, value));
  } else if (key == "rephrase.kind") {
    if (value == "identity") {
      cfg.rephrase.kind = RephraseKind::identity;
    } else if (value == "remote-http" || value == "remote") {
      cfg.rephrase.kind = RephraseKind::remote_http;
    } else {
      bad_value(key, value, "expected identity or remote-http");
    }
  } else if (key == "rephrase.endpoint") {
    cfg.rephrase.endpoint = std::string(value);
  } else if (key == "rephrase.timeout_ms") {
    cfg.rephrase.timeout = std::chrono::milliseconds(parse_integer<long long>(key, value));
  } else if (key == "score.kind") {
    const double p = cfg.score.p;
    const double eps = cfg.score.epsilon;
    cfg.score = parse_score_config(value);
    cfg.score.epsilon = eps;
    // "pmeans" alone keeps a previously configured exponent.
    if (value.find(':') == std::string_view::npos) cfg.score.p = p;
  } else if (key == "score.p") {
    cfg.score.p = parse_real(key, value);
  } else if (key == "score.epsilon") {
    cfg.score.epsilon = parse_real(key, value);
  } else if (key == "cache_path") {
    cfg.cache_path = std::string(value);
  } else if (key == "listen_address") {
    cfg.listen_address = std::string(value);
  } else if (key == "default_k") {
    cfg.default_k = parse_integer<int>(key, value);
  } else {
    throw Error(ErrorCode::invalid_configuration, "unknown config key '" + std::string(key) + "'");
  }
}

void apply_config_text(EngineConfig& cfg, std::string_view text, const std::string& source_name) {
  static const std::regex section_re(R"(^\[\s*([A-Za-z0-9_.\-]+)\s*\]$)");
  static const std::regex kv_re(R"(^([A-Za-z0-9_.\-]+)\s*=\s*(.*)$)");

  std::istringstream in{std::string(text)};
  std::string raw;
  std::string section;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    // Strip a comment unless the '#' sits inside a quoted string.
    bool quoted = false;
    std::string line;
    for (char c : raw) {
      if (c == '"') quoted = !quoted;
      if (c == '#' && !quoted) break;
      line += c;
    }
    line = normalize_whitespace(line);
    if (line.empty()) continue;

    std::smatch m;
    const std::string where = source_name + ":" + std::to_string(lineno);
    if (std::regex_match(line, m, section_re)) {
      section = m[1].str();
      continue;
    }
    if (!std::regex_match(line, m, kv_re)) {
      throw Error(ErrorCode::invalid_configuration, where + ": expected 'key = value'");
    }
    std::string key = section.empty() ? m[1].str() : section + "." + m[1].str();
    std::string value = m[2].str();
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    } else if (value.find('"') != std::string::npos) {
      throw Error(ErrorCode::invalid_configuration, where + ": unbalanced quotes");
    }
    try {
      set_config_value(cfg, key, value);
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
  }
}

void apply_config_file(EngineConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  apply_config_text(cfg, buf.str(), path.string());
}

std::string env_var_name(std::string_view key) {
  std::string out = "AGENTREC_";
  for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

void apply_env_overrides(EngineConfig& cfg, const EnvLookup& lookup) {
  for (const auto& key : config_keys()) {
    if (auto value = lookup(env_var_name(key))) set_config_value(cfg, key, *value);
  }
}

void apply_env_overrides(EngineConfig& cfg) {
  apply_env_overrides(cfg, [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  });
}

void validate(const EngineConfig& cfg) {
  if (cfg.provider.dim < 1) throw Error(ErrorCode::invalid_configuration, "provider.dim must be >= 1");
  if (cfg.provider.kind == ProviderKind::remote_http && cfg.provider.endpoint.empty()) {
    throw Error(ErrorCode::invalid_configuration, "provider.endpoint is required for remote-http");
  }
  if (cfg.rephrase.kind == RephraseKind::remote_http && cfg.rephrase.endpoint.empty()) {
    throw Error(ErrorCode::invalid_configuration, "rephrase.endpoint is required for remote-http");
  }
  if (cfg.default_k < 1) throw Error(ErrorCode::invalid_configuration, "default_k must be >= 1");
  validate(cfg.score);
}

std::string to_string(ProviderKind kind) {
  return kind == ProviderKind::deterministic_hash ? "deterministic-hash" : "remote-http";
}

std::string to_string(RephraseKind kind) { return kind == RephraseKind::identity ? "identity" : "remote-http"; }

}  // namespace agentrec
