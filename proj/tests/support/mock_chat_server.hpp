#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "courtguard/backend.hpp"
#include "courtguard/templates.hpp"

namespace courtguard::test_support {

/// What the mock answers for one request.
struct MockReply {
    int status = 200;
    std::string content;
    double delay_s = 0.0;
    std::optional<TokenUsage> usage;
    std::optional<std::string> raw_body;  // sent verbatim instead of a chat response
    bool drop_connection = false;         // close mid-response (client sees a transport error)
};

struct MockRequest {
    std::string model;
    std::string system;
    std::string user;
    double temperature = -1.0;
    int max_tokens = -1;
    std::string authorization;
    std::string path;
};

/// Test templates tag each role's system text with "ROLE:<name>" so scripts
/// can dispatch on it.
std::optional<AgentRole> role_of(const std::string& system_text);
TemplateSet tagged_templates();

using Script = std::function<MockReply(const MockRequest&, int call_index)>;

/// Script that answers by role; roles without an entry get a 500.
Script by_role(std::map<AgentRole, MockReply> replies);

/// A chat-completion server on 127.0.0.1 with an ephemeral port. Counts
/// requests and tracks the high-water mark of requests in flight.
class MockChatServer {
public:
    explicit MockChatServer(Script script, std::size_t threads = 64);
    ~MockChatServer();

    MockChatServer(const MockChatServer&) = delete;
    MockChatServer& operator=(const MockChatServer&) = delete;

    int port() const { return port_; }
    std::string base_url() const;
    BackendConfig config(double timeout_s = 10.0, int max_retries = 0) const;

    int request_count() const { return count_.load(); }
    int max_in_flight() const { return max_in_flight_.load(); }
    std::vector<MockRequest> requests() const;

    struct Interval {
        std::optional<AgentRole> role;
        std::chrono::steady_clock::time_point start;
        std::chrono::steady_clock::time_point end;
    };
    std::vector<Interval> intervals() const;

    void set_script(Script script);
    void reset();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::thread thread_;
    int port_ = -1;
    std::atomic<int> count_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
};

/// In-process ChatBackend for tests that do not need the wire.
class ScriptedBackend final : public ChatBackend {
public:
    using Fn = std::function<Result<Completion, BackendError>(const ChatRequest&, int call_index)>;

    explicit ScriptedBackend(Fn fn, std::string model = "scripted-model");

    Result<Completion, BackendError> complete(const ChatRequest& req) const override;
    const std::string& model_name() const override { return model_; }

    int calls() const { return calls_.load(); }
    int max_in_flight() const { return max_in_flight_.load(); }

private:
    Fn fn_;
    std::string model_;
    mutable std::atomic<int> calls_{0};
    mutable std::atomic<int> in_flight_{0};
    mutable std::atomic<int> max_in_flight_{0};
};

/// Canonical verdict sentence for generators and scripted judges.
std::string render_verdict(Classification c, ConfidenceLevel conf);

}  // namespace courtguard::test_support
