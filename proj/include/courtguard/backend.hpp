#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "courtguard/result.hpp"
#include "courtguard/types.hpp"

namespace courtguard {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Connection and sampling settings for a chat-completion server.
/// Defaults are deterministic: temperature 0, no jitter in backoff.
struct BackendConfig {
    std::string base_url = "http://127.0.0.1:8080/v1";
    std::string model_name = "local-model";
    double temperature = 0.0;
    int max_output_tokens = 1024;  // not a published value; override per deployment
    double request_timeout_s = 120.0;
    int max_retries = 2;
    double backoff_base_s = 0.5;  // delay before retry n is base * 2^(n-1)
    std::optional<std::string> api_key;

    /// Throws ConfigError on out-of-range values or an unusable base_url.
    void validate() const;
};

/// Per-request overrides of BackendConfig sampling settings.
struct ChatParams {
    std::optional<double> temperature;
    std::optional<int> max_output_tokens;
};

struct ChatRequest {
    std::string system;
    std::string user;
    ChatParams params;
};

struct Completion {
    std::string text;
    std::optional<TokenUsage> usage;
    int attempts = 1;
};

enum class BackendErrorKind { transport, http, timeout, malformed_response };

std::string_view to_string(BackendErrorKind k);

struct BackendError {
    BackendErrorKind kind = BackendErrorKind::transport;
    int status = 0;  // HTTP status for kind == http
    std::string message;
    int attempts = 1;

    /// Transport failures, timeouts and 5xx are retried; 4xx and malformed
    /// bodies are not.
    bool retryable() const;
    std::string describe() const;
};

/// Anything that can answer a chat request. Implementations must be safe to
/// call concurrently from multiple threads.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual Result<Completion, BackendError> complete(const ChatRequest& req) const = 0;
    virtual const std::string& model_name() const = 0;
};

/// Client for `POST {base_url}/chat/completions`.
class HttpChatBackend final : public ChatBackend {
public:
    explicit HttpChatBackend(BackendConfig cfg);

    Result<Completion, BackendError> complete(const ChatRequest& req) const override;
    const std::string& model_name() const override { return cfg_.model_name; }
    const BackendConfig& config() const { return cfg_; }

private:
    Result<Completion, BackendError> attempt(const ChatRequest& req) const;

    BackendConfig cfg_;
    std::string origin_;       // scheme://host:port
    std::string path_prefix_;  // path component of base_url, no trailing slash
};

Result<Completion, BackendError> complete(const ChatRequest& req, const BackendConfig& cfg);

/// Sends a one-token "ping" request.
Result<std::monostate, BackendError> healthcheck(const BackendConfig& cfg);

/// Wire helpers, exposed for tests and mock servers.
nlohmann::json build_request_body(const ChatRequest& req, const BackendConfig& cfg);
Result<Completion, BackendError> parse_response_body(const std::string& body);

}  // namespace courtguard
