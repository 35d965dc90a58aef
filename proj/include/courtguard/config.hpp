#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "courtguard/backend.hpp"
#include "courtguard/detectors.hpp"

namespace courtguard {

/// What the service answers when a classification fails. fail_closed blocks
/// (injection), fail_open allows (benign). Either way the event is logged.
enum class FailurePolicy { fail_open, fail_closed };

std::string_view to_string(FailurePolicy p);
std::optional<FailurePolicy> parse_policy(std::string_view s);

struct EngineConfig {
    BackendConfig backend;
    SystemKind system = SystemKind::court;
    std::optional<std::filesystem::path> templates;  // unset: built-in set
    std::optional<std::filesystem::path> patterns;   // unset: built-in table
    FailurePolicy policy = FailurePolicy::fail_closed;
    std::size_t concurrency = 4;
    std::string bind = "127.0.0.1:8787";

    void validate() const;
};

/// `key = value` lines, `#` comments. Keys: base_url, model, temperature,
/// max_output_tokens, request_timeout, max_retries, backoff_base, api_key,
/// system, templates, patterns, policy, concurrency, bind. Relative paths are
/// resolved against `base_dir`. Throws ConfigError.
EngineConfig parse_engine_config(std::string_view text, const std::filesystem::path& base_dir = {});
EngineConfig load_engine_config(const std::filesystem::path& path);

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

/// COURTGUARD_BASE_URL and COURTGUARD_API_KEY replace config-file values.
void apply_env_overrides(EngineConfig& cfg, const EnvLookup& env);
std::optional<std::string> process_env(const char* name);

}  // namespace courtguard
