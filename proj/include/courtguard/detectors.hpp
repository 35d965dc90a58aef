#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "courtguard/backend.hpp"
#include "courtguard/result.hpp"
#include "courtguard/templates.hpp"
#include "courtguard/types.hpp"
#include "courtguard/verdict_parser.hpp"

namespace courtguard {

enum class SystemKind { direct, court };

std::string_view to_string(SystemKind s);
std::optional<SystemKind> parse_system(std::string_view s);

/// A successful classification. Direct runs hold one transcript; court runs
/// hold three, always ordered defense, prosecution, judge.
struct DetectorRun {
    Verdict verdict;
    std::vector<AgentTranscript> transcripts;
    std::string template_set_id;
    double total_latency_s = 0.0;
};

enum class FailureKind { backend, parse, template_error };

std::string_view to_string(FailureKind k);

struct DetectorFailure {
    FailureKind kind = FailureKind::backend;
    std::string message;
    std::vector<AgentTranscript> transcripts;  // calls that completed before the failure
    std::optional<BackendError> backend_error;
    std::optional<ParseFailure> parse_failure;
    std::string template_set_id;
    double total_latency_s = 0.0;
};

using DetectorResult = Result<DetectorRun, DetectorFailure>;

/// Single judge call over the direct template.
DetectorResult classify_direct(std::string_view prompt, const TemplateSet& templates,
                               const ChatBackend& backend,
                               const PatternTable& patterns = PatternTable::builtin());

/// One attorney call. The completion is the argument; it is not parsed.
/// Throws TemplateError if the side's template is missing or malformed.
Result<AgentTranscript, BackendError> build_argument(AgentRole side, std::string_view prompt,
                                                     const TemplateSet& templates,
                                                     const ChatBackend& backend);

/// Defense and prosecution run concurrently; once both return, the judge
/// sees the prompt and both arguments verbatim. Any failed call aborts the
/// run, and the judge is never called after an attorney failure.
DetectorResult classify_court(std::string_view prompt, const TemplateSet& templates,
                              const ChatBackend& backend,
                              const PatternTable& patterns = PatternTable::builtin());

/// Immutable, shareable classifier handle used by the evaluator and service.
class Detector {
public:
    Detector(SystemKind system, std::shared_ptr<const ChatBackend> backend,
             std::shared_ptr<const TemplateSet> templates,
             std::shared_ptr<const PatternTable> patterns = nullptr);

    DetectorResult classify(std::string_view prompt) const;

    SystemKind system() const { return system_; }
    const std::string& model_name() const { return backend_->model_name(); }
    const std::string& template_set_id() const { return templates_->id(); }
    const ChatBackend& backend() const { return *backend_; }
    const TemplateSet& templates() const { return *templates_; }
    const PatternTable& patterns() const { return patterns_ ? *patterns_ : PatternTable::builtin(); }

    /// Backend calls one classification issues when every call succeeds.
    int calls_per_classification() const { return system_ == SystemKind::court ? 3 : 1; }

private:
    SystemKind system_;
    std::shared_ptr<const ChatBackend> backend_;
    std::shared_ptr<const TemplateSet> templates_;
    std::shared_ptr<const PatternTable> patterns_;
};

}  // namespace courtguard
