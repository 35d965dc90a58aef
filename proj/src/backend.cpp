#include "courtguard/backend.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>

namespace courtguard {

namespace {

using Clock = std::chrono::steady_clock;

struct SplitUrl {
    std::string origin;
    std::string path;
};

SplitUrl split_base_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("base_url needs a scheme: " + url);
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw ConfigError("unsupported base_url scheme: " + scheme);
    }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (scheme == "https") throw ConfigError("this build has no TLS support: " + url);
#endif
    const auto host_begin = scheme_end + 3;
    const auto path_begin = url.find('/', host_begin);
    SplitUrl out;
    out.origin = url.substr(0, path_begin);
    if (out.origin.size() <= host_begin) throw ConfigError("base_url has no host: " + url);
    if (path_begin != std::string::npos) out.path = url.substr(path_begin);
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
    return out;
}

template <typename Setter>
void set_timeout(Setter&& setter, double seconds) {
    const auto whole = static_cast<time_t>(seconds);
    const auto usec = static_cast<time_t>(std::llround((seconds - static_cast<double>(whole)) * 1e6));
    setter(whole, usec);
}

}  // namespace

std::string_view to_string(BackendErrorKind k) {
    switch (k) {
        case BackendErrorKind::transport: return "transport";
        case BackendErrorKind::http: return "http";
        case BackendErrorKind::timeout: return "timeout";
        case BackendErrorKind::malformed_response: return "malformed_response";
    }
    return "transport";
}

bool BackendError::retryable() const {
    switch (kind) {
        case BackendErrorKind::transport:
        case BackendErrorKind::timeout: return true;
        case BackendErrorKind::http: return status >= 500;
        case BackendErrorKind::malformed_response: return false;
    }
    return false;
}

std::string BackendError::describe() const {
    std::string out(to_string(kind));
    if (kind == BackendErrorKind::http) out += "(" + std::to_string(status) + ")";
    if (!message.empty()) out += ": " + message;
    out += " after " + std::to_string(attempts) + (attempts == 1 ? " attempt" : " attempts");
    return out;
}

void BackendConfig::validate() const {
    if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
    if (max_output_tokens <= 0) throw ConfigError("max_output_tokens must be positive");
    if (!(request_timeout_s > 0.0)) throw ConfigError("request_timeout must be positive");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (!(backoff_base_s >= 0.0)) throw ConfigError("backoff base must be >= 0");
    if (model_name.empty()) throw ConfigError("model_name must be set");
    split_base_url(base_url);
}

nlohmann::json build_request_body(const ChatRequest& req, const BackendConfig& cfg) {
    nlohmann::json messages = nlohmann::json::array();
    if (!req.system.empty()) messages.push_back({{"role", "system"}, {"content", req.system}});
    messages.push_back({{"role", "user"}, {"content", req.user}});
    return {
        {"model", cfg.model_name},
        {"messages", std::move(messages)},
        {"temperature", req.params.temperature.value_or(cfg.temperature)},
        {"max_tokens", req.params.max_output_tokens.value_or(cfg.max_output_tokens)},
    };
}

Result<Completion, BackendError> parse_response_body(const std::string& body) {
    const auto malformed = [](std::string msg) {
        return BackendError{BackendErrorKind::malformed_response, 0, std::move(msg), 1};
    };
    const auto doc = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object()) return malformed("response is not a JSON object");
    const auto choices = doc.find("choices");
    if (choices == doc.end() || !choices->is_array() || choices->empty()) {
        return malformed("response has no choices");
    }
    const auto& first = (*choices)[0];
    if (!first.is_object() || !first.contains("message") || !first["message"].is_object()) {
        return malformed("choices[0] has no message");
    }
    const auto& message = first["message"];
    const auto content = message.find("content");
    if (content == message.end() || !content->is_string()) {
        return malformed("choices[0].message.content is not a string");
    }

    Completion out;
    out.text = content->get<std::string>();
    if (const auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) {
        TokenUsage u;
        const auto read = [&](const char* key, std::int64_t& dst) {
            const auto it = usage->find(key);
            if (it == usage->end() || !it->is_number_integer()) return false;
            dst = it->get<std::int64_t>();
            return dst >= 0;
        };
        if (read("prompt_tokens", u.prompt_tokens) && read("completion_tokens", u.completion_tokens)) {
            out.usage = u;
        }
    }
    return out;
}

HttpChatBackend::HttpChatBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    auto parts = split_base_url(cfg_.base_url);
    origin_ = std::move(parts.origin);
    path_prefix_ = std::move(parts.path);
}

Result<Completion, BackendError> HttpChatBackend::attempt(const ChatRequest& req) const {
    httplib::Client client(origin_);
    set_timeout([&](time_t s, time_t us) { client.set_connection_timeout(s, us); },
                cfg_.request_timeout_s);
    set_timeout([&](time_t s, time_t us) { client.set_read_timeout(s, us); },
                cfg_.request_timeout_s);
    set_timeout([&](time_t s, time_t us) { client.set_write_timeout(s, us); },
                cfg_.request_timeout_s);
    if (cfg_.api_key && !cfg_.api_key->empty()) client.set_bearer_token_auth(*cfg_.api_key);

    const std::string body = build_request_body(req, cfg_).dump();
    const auto started = Clock::now();
    auto res = client.Post(path_prefix_ + "/chat/completions", body, "application/json");
    const double elapsed = std::chrono::duration<double>(Clock::now() - started).count();

    if (!res) {
        const auto err = res.error();
        const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                               (err == httplib::Error::Read && elapsed >= 0.9 * cfg_.request_timeout_s);
        return BackendError{timed_out ? BackendErrorKind::timeout : BackendErrorKind::transport, 0,
                            httplib::to_string(err), 1};
    }
    if (res->status < 200 || res->status >= 300) {
        return BackendError{BackendErrorKind::http, res->status, res->body.substr(0, 256), 1};
    }
    return parse_response_body(res->body);
}

Result<Completion, BackendError> HttpChatBackend::complete(const ChatRequest& req) const {
    for (int attempt_no = 1;; ++attempt_no) {
        auto result = attempt(req);
        if (result.ok()) {
            result.value().attempts = attempt_no;
            return result;
        }
        auto& err = result.error();
        err.attempts = attempt_no;
        if (!err.retryable() || attempt_no > cfg_.max_retries) return result;
        const double delay = cfg_.backoff_base_s * std::pow(2.0, attempt_no - 1);
        std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
}

Result<Completion, BackendError> complete(const ChatRequest& req, const BackendConfig& cfg) {
    return HttpChatBackend(cfg).complete(req);
}

Result<std::monostate, BackendError> healthcheck(const BackendConfig& cfg) {
    ChatRequest ping;
    ping.user = "ping";
    ping.params.max_output_tokens = 1;
    auto res = complete(ping, cfg);
    if (!res.ok()) return std::move(res).error();
    return std::monostate{};
}

}  // namespace courtguard
