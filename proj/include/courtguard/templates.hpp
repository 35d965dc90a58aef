#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

#include "courtguard/types.hpp"

namespace courtguard {

class TemplateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One role's prompt. `{name}` in user_text is a placeholder, `{{` and `}}`
/// are literal braces, and any other brace is copied through unchanged.
struct PromptTemplate {
    AgentRole role = AgentRole::direct;
    std::string system_text;
    std::string user_text;
    std::set<std::string> placeholders;  // declared in the manifest

    /// Substitutes every placeholder in a single pass; substituted values are
    /// never rescanned. Throws TemplateError if a placeholder has no value.
    std::string render(const std::map<std::string, std::string, std::less<>>& values) const;
};

/// Placeholder names referenced by a template body.
std::set<std::string> placeholders_in(std::string_view text);

/// The four role templates plus the id recorded in every report.
class TemplateSet {
public:
    TemplateSet() = default;
    TemplateSet(std::string id, std::map<AgentRole, PromptTemplate> templates);

    /// Reads manifest.json and direct/defense/prosecution/judge.txt. Role
    /// files are optional individually; validation runs on what is present.
    static TemplateSet load(const std::filesystem::path& dir);
    /// Compiled-in copy of templates/default.
    static const TemplateSet& builtin();

    /// Parses a role file: optional `[system]` and `[user]` section lines;
    /// a file with neither is all user text.
    static PromptTemplate parse_role_file(AgentRole role, std::string_view text);

    const std::string& id() const { return id_; }
    bool has(AgentRole role) const { return templates_.count(role) != 0; }
    const PromptTemplate& at(AgentRole role) const;

    /// Throws TemplateError when a template references an undeclared or
    /// unknown placeholder, declares one it never uses, puts a placeholder
    /// in system text, or (judge) omits an attorney argument.
    void validate() const;
    void validate(AgentRole role) const;

private:
    std::string id_;
    std::map<AgentRole, PromptTemplate> templates_;
};

}  // namespace courtguard
