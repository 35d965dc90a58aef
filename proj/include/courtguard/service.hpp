#pragma once

#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "courtguard/config.hpp"
#include "courtguard/detectors.hpp"

namespace courtguard {

/// What a caller of the screening endpoint receives. Always labeled:
/// failures are resolved by the configured policy.
struct ScreenDecision {
    Classification classification = Classification::injection;
    ConfidenceLevel confidence = ConfidenceLevel::unspecified;
    bool failed = false;
    bool policy_applied = false;  // true iff the label came from policy
    double latency_s = 0.0;
    std::optional<std::string> failure;
    bool backend_unreachable = false;  // transport error or timeout

    nlohmann::json to_json() const;
};

ScreenDecision decide(const DetectorResult& result, FailurePolicy policy);

/// HTTP front end for a Detector:
///   POST /v1/screen {"prompt": "..."} -> ScreenDecision JSON
///   GET  /v1/health                   -> backend and template status
/// At most `concurrency` classifications run at once; further requests wait.
class ScreeningService {
public:
    ScreeningService(std::shared_ptr<const Detector> detector, FailurePolicy policy,
                     std::size_t concurrency);
    ~ScreeningService();

    ScreeningService(const ScreeningService&) = delete;
    ScreeningService& operator=(const ScreeningService&) = delete;

    /// Binds to `port` (0 picks a free one) and returns the bound port, or -1.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    bool listen();
    void stop();
    void wait_until_ready() const;

    /// Request handling without the socket, for embedding and tests.
    ScreenDecision screen(const std::string& prompt) const;
    nlohmann::json health() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace courtguard
