#include "courtguard/verdict_parser.hpp"

#include <fstream>
#include <optional>
#include <sstream>

#include "courtguard_embedded.hpp"

namespace courtguard {

namespace {

using Iter = std::string_view::const_iterator;

std::optional<PatternKind> kind_from_name(std::string_view name) {
    if (name == "marker") return PatternKind::marker;
    if (name == "benign") return PatternKind::benign;
    if (name == "injection") return PatternKind::injection;
    if (name == "low") return PatternKind::low;
    if (name == "moderate") return PatternKind::moderate;
    if (name == "high") return PatternKind::high;
    return std::nullopt;
}

bool any_match(const PatternTable& table, PatternKind kind, Iter first, Iter last) {
    for (const auto* rule : table.rules_of(kind)) {
        if (std::regex_search(first, last, rule->regex)) return true;
    }
    return false;
}

std::optional<Classification> match_polarity(const PatternTable& table, Iter first, Iter last) {
    if (any_match(table, PatternKind::benign, first, last)) return Classification::benign;
    if (any_match(table, PatternKind::injection, first, last)) return Classification::injection;
    return std::nullopt;
}

ConfidenceLevel match_confidence(const PatternTable& table, Iter first, Iter last) {
    if (any_match(table, PatternKind::low, first, last)) return ConfidenceLevel::low;
    if (any_match(table, PatternKind::moderate, first, last)) return ConfidenceLevel::moderate;
    if (any_match(table, PatternKind::high, first, last)) return ConfidenceLevel::high;
    return ConfidenceLevel::unspecified;
}

struct MarkerSpan {
    std::size_t begin;
    std::size_t end;
};

std::optional<MarkerSpan> last_marker(const PatternTable& table, std::string_view raw) {
    std::optional<MarkerSpan> best;
    for (const auto* rule : table.rules_of(PatternKind::marker)) {
        using RegexIter = std::regex_iterator<Iter>;
        for (RegexIter it(raw.begin(), raw.end(), rule->regex), end; it != end; ++it) {
            const auto begin = static_cast<std::size_t>(it->position(0));
            const auto stop = begin + static_cast<std::size_t>(it->length(0));
            if (!best || begin > best->begin) best = MarkerSpan{begin, stop};
        }
    }
    return best;
}

}  // namespace

PatternTable PatternTable::parse(std::string_view text) {
    PatternTable table;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw PatternTableError("pattern table line " + std::to_string(line_no) +
                                    ": expected kind<TAB>pattern");
        }
        const std::string name = line.substr(0, tab);
        const std::string pattern = line.substr(tab + 1);
        if (name == "version") {
            table.version_ = pattern;
            continue;
        }
        const auto kind = kind_from_name(name);
        if (!kind) {
            throw PatternTableError("pattern table line " + std::to_string(line_no) +
                                    ": unknown kind '" + name + "'");
        }
        if (pattern.empty()) {
            throw PatternTableError("pattern table line " + std::to_string(line_no) +
                                    ": empty pattern");
        }
        try {
            table.rules_.push_back(
                {*kind, pattern,
                 std::regex(pattern, std::regex::ECMAScript | std::regex::icase |
                                         std::regex::optimize)});
        } catch (const std::regex_error& e) {
            throw PatternTableError("pattern table line " + std::to_string(line_no) +
                                    ": bad regex: " + e.what());
        }
    }
    if (table.rules_of(PatternKind::benign).empty() ||
        table.rules_of(PatternKind::injection).empty()) {
        throw PatternTableError("pattern table needs at least one benign and one injection rule");
    }
    return table;
}

PatternTable PatternTable::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PatternTableError("cannot open pattern table: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

const PatternTable& PatternTable::builtin() {
    static const PatternTable table = parse(embedded::kVerdictPatterns);
    return table;
}

std::vector<const PatternRule*> PatternTable::rules_of(PatternKind kind) const {
    std::vector<const PatternRule*> out;
    for (const auto& rule : rules_) {
        if (rule.kind == kind) out.push_back(&rule);
    }
    return out;
}

Result<Verdict, ParseFailure> parse_verdict(std::string_view raw, const PatternTable& table) {
    if (!has_content(raw)) return ParseFailure{std::string(raw), "empty completion"};

    const auto marker = last_marker(table, raw);
    const Iter seg_begin = marker ? raw.begin() + static_cast<std::ptrdiff_t>(marker->end)
                                  : raw.begin();

    auto polarity = match_polarity(table, seg_begin, raw.end());
    if (!polarity && marker) polarity = match_polarity(table, raw.begin(), raw.end());
    if (!polarity) return ParseFailure{std::string(raw), "no verdict polarity found"};

    Verdict v;
    v.classification = *polarity;
    v.confidence = match_confidence(table, seg_begin, raw.end());
    v.rationale = marker ? std::string(raw.substr(0, marker->begin)) : std::string();
    v.raw = std::string(raw);
    return v;
}

}  // namespace courtguard
