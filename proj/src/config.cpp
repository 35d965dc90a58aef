#include "courtguard/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace courtguard {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used == value.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("config key '" + key + "': not a number: " + value);
}

long long to_integer(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(value, &used);
        if (used == value.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("config key '" + key + "': not an integer: " + value);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
    std::filesystem::path p(value);
    return p.is_relative() && !base.empty() ? base / p : p;
}

}  // namespace

std::string_view to_string(FailurePolicy p) {
    return p == FailurePolicy::fail_open ? "fail_open" : "fail_closed";
}

std::optional<FailurePolicy> parse_policy(std::string_view s) {
    if (s == "fail_open") return FailurePolicy::fail_open;
    if (s == "fail_closed") return FailurePolicy::fail_closed;
    return std::nullopt;
}

void EngineConfig::validate() const {
    backend.validate();
    if (concurrency == 0) throw ConfigError("concurrency must be >= 1");
    if (bind.find(':') == std::string::npos) throw ConfigError("bind must be host:port");
}

EngineConfig parse_engine_config(std::string_view text, const std::filesystem::path& base_dir) {
    EngineConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto content = trim(line);
        if (content.empty() || content.front() == '#') continue;
        const auto eq = content.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const auto key = trim(std::string_view(content).substr(0, eq));
        const auto value = trim(std::string_view(content).substr(eq + 1));

        if (key == "base_url") cfg.backend.base_url = value;
        else if (key == "model") cfg.backend.model_name = value;
        else if (key == "temperature") cfg.backend.temperature = to_double(key, value);
        else if (key == "max_output_tokens") cfg.backend.max_output_tokens = static_cast<int>(to_integer(key, value));
        else if (key == "request_timeout") cfg.backend.request_timeout_s = to_double(key, value);
        else if (key == "max_retries") cfg.backend.max_retries = static_cast<int>(to_integer(key, value));
        else if (key == "backoff_base") cfg.backend.backoff_base_s = to_double(key, value);
        else if (key == "api_key") cfg.backend.api_key = value;
        else if (key == "system") {
            const auto s = parse_system(value);
            if (!s) throw ConfigError("config key 'system' must be direct or court");
            cfg.system = *s;
        } else if (key == "templates") cfg.templates = resolve(base_dir, value);
        else if (key == "patterns") cfg.patterns = resolve(base_dir, value);
        else if (key == "policy") {
            const auto p = parse_policy(value);
            if (!p) throw ConfigError("config key 'policy' must be fail_open or fail_closed");
            cfg.policy = *p;
        } else if (key == "concurrency") {
            const auto n = to_integer(key, value);
            if (n < 1) throw ConfigError("concurrency must be >= 1");
            cfg.concurrency = static_cast<std::size_t>(n);
        } else if (key == "bind") cfg.bind = value;
        else throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    return cfg;
}

EngineConfig load_engine_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_engine_config(buf.str(), path.parent_path());
}

void apply_env_overrides(EngineConfig& cfg, const EnvLookup& env) {
    if (auto url = env("COURTGUARD_BASE_URL"); url && !url->empty()) cfg.backend.base_url = *url;
    if (auto key = env("COURTGUARD_API_KEY"); key && !key->empty()) cfg.backend.api_key = *key;
}

std::optional<std::string> process_env(const char* name) {
    if (const char* v = std::getenv(name)) return std::string(v);
    return std::nullopt;
}

}  // namespace courtguard
