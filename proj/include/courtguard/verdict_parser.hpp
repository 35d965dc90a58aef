#pragma once

#include <filesystem>
#include <regex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "courtguard/result.hpp"
#include "courtguard/types.hpp"

namespace courtguard {

/// Raised by the pattern-table loader on malformed input.
class PatternTableError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class PatternKind { marker, benign, injection, low, moderate, high };

struct PatternRule {
    PatternKind kind;
    std::string source;
    std::regex regex;
};

/// The versioned, human-editable rule set behind parse_verdict.
///
/// Text format: UTF-8, one `kind<TAB>pattern` rule per line, `#` starts a
/// comment line. `kind` is one of marker, benign, injection, low, moderate,
/// high, or `version` (whose pattern column is the revision string).
class PatternTable {
public:
    static PatternTable parse(std::string_view text);
    static PatternTable load(const std::filesystem::path& path);
    /// The table shipped in resources/verdict_patterns.tsv, compiled in.
    static const PatternTable& builtin();

    const std::string& version() const { return version_; }
    const std::vector<PatternRule>& rules() const { return rules_; }
    std::vector<const PatternRule*> rules_of(PatternKind kind) const;

private:
    std::string version_;
    std::vector<PatternRule> rules_;
};

struct ParseFailure {
    std::string raw;
    std::string reason;
};

/// Parses a judge or direct-detector completion into a Verdict.
///
/// The last marker match splits the completion: text before it becomes the
/// rationale, text after it is searched for polarity and confidence. Benign
/// (negation) rules take precedence over injection rules. Without a marker the
/// whole completion is searched. If the segment after the marker carries no
/// polarity, the whole completion is searched for polarity before giving up.
Result<Verdict, ParseFailure> parse_verdict(std::string_view raw,
                                            const PatternTable& table = PatternTable::builtin());

}  // namespace courtguard
