#include "courtguard/templates.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "courtguard_embedded.hpp"

namespace courtguard {

namespace {

constexpr AgentRole kRoles[] = {AgentRole::direct, AgentRole::defense, AgentRole::prosecution,
                                AgentRole::judge};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Calls on_literal / on_placeholder for each piece of `text`.
template <typename Literal, typename Placeholder>
void scan(std::string_view text, Literal&& on_literal, Placeholder&& on_placeholder) {
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c == '{' && i + 1 < text.size() && text[i + 1] == '{') {
            on_literal(std::string_view("{"));
            i += 2;
        } else if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
            on_literal(std::string_view("}"));
            i += 2;
        } else if (c == '{' && i + 1 < text.size() && is_ident_start(text[i + 1])) {
            std::size_t j = i + 1;
            while (j < text.size() && is_ident(text[j])) ++j;
            if (j < text.size() && text[j] == '}') {
                on_placeholder(text.substr(i + 1, j - i - 1));
                i = j + 1;
            } else {
                on_literal(text.substr(i, j - i));
                i = j;
            }
        } else {
            on_literal(text.substr(i, 1));
            ++i;
        }
    }
}

const std::set<std::string>& allowed_for(AgentRole role) {
    static const std::set<std::string> attorney{"prompt"};
    static const std::set<std::string> judge{"prompt", "defense_argument", "prosecution_argument"};
    return role == AgentRole::judge ? judge : attorney;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TemplateError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string trim_section(std::string s) {
    while (!s.empty() && (s.front() == '\n' || s.front() == '\r')) s.erase(s.begin());
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    return s;
}

TemplateSet from_manifest(const nlohmann::json& manifest,
                          const std::map<AgentRole, std::string>& bodies) {
    if (!manifest.is_object() || !manifest.contains("template_set_id") ||
        !manifest["template_set_id"].is_string()) {
        throw TemplateError("manifest needs a string template_set_id");
    }
    const auto& decls = manifest.value("placeholders", nlohmann::json::object());
    std::map<AgentRole, PromptTemplate> templates;
    for (const auto& [role, body] : bodies) {
        auto tmpl = TemplateSet::parse_role_file(role, body);
        const std::string name(to_string(role));
        if (decls.contains(name)) {
            for (const auto& p : decls[name]) tmpl.placeholders.insert(p.get<std::string>());
        } else {
            tmpl.placeholders = placeholders_in(tmpl.user_text);
        }
        templates.emplace(role, std::move(tmpl));
    }
    TemplateSet set(manifest["template_set_id"].get<std::string>(), std::move(templates));
    set.validate();
    return set;
}

}  // namespace

std::set<std::string> placeholders_in(std::string_view text) {
    std::set<std::string> out;
    scan(text, [](std::string_view) {}, [&](std::string_view name) { out.emplace(name); });
    return out;
}

std::string PromptTemplate::render(
    const std::map<std::string, std::string, std::less<>>& values) const {
    std::string out;
    out.reserve(user_text.size());
    scan(
        user_text, [&](std::string_view lit) { out.append(lit); },
        [&](std::string_view name) {
            const auto it = values.find(name);
            if (it == values.end()) {
                throw TemplateError("unresolved placeholder {" + std::string(name) + "} in " +
                                    std::string(to_string(role)) + " template");
            }
            out.append(it->second);
        });
    return out;
}

TemplateSet::TemplateSet(std::string id, std::map<AgentRole, PromptTemplate> templates)
    : id_(std::move(id)), templates_(std::move(templates)) {
    for (auto& [role, tmpl] : templates_) tmpl.role = role;
}

PromptTemplate TemplateSet::parse_role_file(AgentRole role, std::string_view text) {
    PromptTemplate tmpl;
    tmpl.role = role;
    std::string* current = &tmpl.user_text;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        std::string bare = line;
        if (!bare.empty() && bare.back() == '\r') bare.pop_back();
        if (bare == "[system]") {
            current = &tmpl.system_text;
            continue;
        }
        if (bare == "[user]") {
            current = &tmpl.user_text;
            continue;
        }
        current->append(line).push_back('\n');
    }
    tmpl.system_text = trim_section(std::move(tmpl.system_text));
    tmpl.user_text = trim_section(std::move(tmpl.user_text));
    return tmpl;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    const auto manifest = nlohmann::json::parse(read_file(manifest_path), nullptr, false);
    if (manifest.is_discarded()) throw TemplateError("invalid JSON in " + manifest_path.string());
    std::map<AgentRole, std::string> bodies;
    for (const auto role : kRoles) {
        const auto path = dir / (std::string(to_string(role)) + ".txt");
        if (std::filesystem::exists(path)) bodies.emplace(role, read_file(path));
    }
    if (bodies.empty()) throw TemplateError("no role templates found in " + dir.string());
    return from_manifest(manifest, bodies);
}

const TemplateSet& TemplateSet::builtin() {
    static const TemplateSet set = [] {
        std::map<AgentRole, std::string> bodies{
            {AgentRole::direct, std::string(embedded::kTemplateDirect)},
            {AgentRole::defense, std::string(embedded::kTemplateDefense)},
            {AgentRole::prosecution, std::string(embedded::kTemplateProsecution)},
            {AgentRole::judge, std::string(embedded::kTemplateJudge)},
        };
        return from_manifest(nlohmann::json::parse(embedded::kTemplateManifest), bodies);
    }();
    return set;
}

const PromptTemplate& TemplateSet::at(AgentRole role) const {
    const auto it = templates_.find(role);
    if (it == templates_.end()) {
        throw TemplateError("template set '" + id_ + "' has no " + std::string(to_string(role)) +
                            " template");
    }
    return it->second;
}

void TemplateSet::validate(AgentRole role) const {
    const auto& tmpl = at(role);
    const std::string name(to_string(role));
    if (!placeholders_in(tmpl.system_text).empty()) {
        throw TemplateError(name + " template: system text may not contain placeholders");
    }
    const auto used = placeholders_in(tmpl.user_text);
    const auto& allowed = allowed_for(role);
    for (const auto& p : used) {
        if (!allowed.count(p)) throw TemplateError(name + " template: unknown placeholder {" + p + "}");
        if (!tmpl.placeholders.count(p)) {
            throw TemplateError(name + " template: placeholder {" + p + "} is not declared");
        }
    }
    for (const auto& p : tmpl.placeholders) {
        if (!used.count(p)) {
            throw TemplateError(name + " template: declared placeholder {" + p + "} is never used");
        }
    }
    if (!has_content(tmpl.user_text)) throw TemplateError(name + " template: empty user text");
    if (role == AgentRole::judge &&
        (!used.count("defense_argument") || !used.count("prosecution_argument"))) {
        throw TemplateError("judge template must reference {defense_argument} and {prosecution_argument}");
    }
}

void TemplateSet::validate() const {
    if (id_.empty()) throw TemplateError("template set id is empty");
    for (const auto& [role, tmpl] : templates_) validate(role);
}

}  // namespace courtguard
