#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace courtguard {

/// Binary detector output. Injection is the positive class for every metric.
enum class Classification { injection, benign };

/// Ground truth attached to a prompt. `unknown` is only legal for live
/// classification, never inside an evaluation run.
enum class Label { injection, benign, unknown };

/// Graded judge confidence. `unspecified` sorts below `low`.
enum class ConfidenceLevel : int { unspecified = 0, low = 1, moderate = 2, high = 3 };

inline std::strong_ordering operator<=>(ConfidenceLevel a, ConfidenceLevel b) {
    return static_cast<int>(a) <=> static_cast<int>(b);
}

enum class AgentRole { direct, defense, prosecution, judge };

std::string_view to_string(Classification c);
std::string_view to_string(Label l);
std::string_view to_string(ConfidenceLevel c);
std::string_view to_string(AgentRole r);

std::optional<Classification> parse_classification(std::string_view s);
std::optional<Label> parse_label(std::string_view s);
std::optional<ConfidenceLevel> parse_confidence(std::string_view s);
std::optional<AgentRole> parse_role(std::string_view s);

inline Label to_label(Classification c) {
    return c == Classification::injection ? Label::injection : Label::benign;
}

inline std::optional<Classification> to_classification(Label l) {
    switch (l) {
        case Label::injection: return Classification::injection;
        case Label::benign: return Classification::benign;
        case Label::unknown: break;
    }
    return std::nullopt;
}

struct PromptRecord {
    std::string id;
    std::string text;
    Label label = Label::unknown;
    std::string source;
    std::optional<std::string> stratum;

    friend bool operator==(const PromptRecord&, const PromptRecord&) = default;
};

/// True when `text` contains at least one non-whitespace byte.
bool has_content(std::string_view text);

struct Verdict {
    Classification classification = Classification::benign;
    ConfidenceLevel confidence = ConfidenceLevel::unspecified;
    std::string rationale;
    std::string raw;

    friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// Drops confidence; scoring is binary.
inline Classification verdict_to_binary(const Verdict& v) { return v.classification; }

struct TokenUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;

    friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

/// One agent call: the rendered prompt it was given and what came back.
struct AgentTranscript {
    AgentRole role = AgentRole::direct;
    std::string rendered_prompt;
    std::string completion;
    double latency_s = 0.0;
    std::optional<TokenUsage> token_usage;
};

}  // namespace courtguard
