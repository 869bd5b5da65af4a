#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agentrec/embedding.hpp"
#include "agentrec/scoring.hpp"

namespace agentrec {

struct EngineConfig {
  EmbeddingProviderSpec provider;
  RephraseSpec rephrase;
  ScoreConfig score;
  std::filesystem::path cache_path;
  std::string listen_address = "127.0.0.1:8080";
  int default_k = 3;
};

/// Dotted keys accepted by config files, AGENTREC_* variables and CLI flags.
const std::vector<std::string>& config_keys();

/// Sets one key from its textual value. Throws invalid_configuration for
/// unknown keys or malformed values.
void set_config_value(EngineConfig& cfg, std::string_view key, std::string_view value);

/// TOML-style "key = value" lines, optional [section] headers (joined to the
/// key with '.'), '#' comments, quoted or bare values.
void apply_config_text(EngineConfig& cfg, std::string_view text, const std::string& source_name = "<config>");
void apply_config_file(EngineConfig& cfg, const std::filesystem::path& path);

/// "provider.dim" -> "AGENTREC_PROVIDER_DIM".
std::string env_var_name(std::string_view key);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
void apply_env_overrides(EngineConfig& cfg, const EnvLookup& lookup);
void apply_env_overrides(EngineConfig& cfg);  // reads the process environment

void validate(const EngineConfig& cfg);

std::string to_string(ProviderKind kind);
std::string to_string(RephraseKind kind);

}  // namespace agentrec
