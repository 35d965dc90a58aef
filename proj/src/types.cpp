#include "courtguard/types.hpp"

#include <algorithm>
#include <cctype>

namespace courtguard {

std::string_view to_string(Classification c) {
    return c == Classification::injection ? "injection" : "benign";
}

std::string_view to_string(Label l) {
    switch (l) {
        case Label::injection: return "injection";
        case Label::benign: return "benign";
        case Label::unknown: return "unknown";
    }
    return "unknown";
}

std::string_view to_string(ConfidenceLevel c) {
    switch (c) {
        case ConfidenceLevel::low: return "low";
        case ConfidenceLevel::moderate: return "moderate";
        case ConfidenceLevel::high: return "high";
        case ConfidenceLevel::unspecified: return "unspecified";
    }
    return "unspecified";
}

std::string_view to_string(AgentRole r) {
    switch (r) {
        case AgentRole::direct: return "direct";
        case AgentRole::defense: return "defense";
        case AgentRole::prosecution: return "prosecution";
        case AgentRole::judge: return "judge";
    }
    return "direct";
}

std::optional<Classification> parse_classification(std::string_view s) {
    if (s == "injection") return Classification::injection;
    if (s == "benign") return Classification::benign;
    return std::nullopt;
}

std::optional<Label> parse_label(std::string_view s) {
    if (s == "injection" || s == "jailbreak" || s == "1") return Label::injection;
    if (s == "benign" || s == "0") return Label::benign;
    if (s == "unknown") return Label::unknown;
    return std::nullopt;
}

std::optional<ConfidenceLevel> parse_confidence(std::string_view s) {
    if (s == "low") return ConfidenceLevel::low;
    if (s == "moderate") return ConfidenceLevel::moderate;
    if (s == "high") return ConfidenceLevel::high;
    if (s == "unspecified") return ConfidenceLevel::unspecified;
    return std::nullopt;
}

std::optional<AgentRole> parse_role(std::string_view s) {
    if (s == "direct") return AgentRole::direct;
    if (s == "defense") return AgentRole::defense;
    if (s == "prosecution") return AgentRole::prosecution;
    if (s == "judge") return AgentRole::judge;
    return std::nullopt;
}

bool has_content(std::string_view text) {
    return std::any_of(text.begin(), text.end(),
                       [](unsigned char c) { return !std::isspace(c); });
}

}  // namespace courtguard
