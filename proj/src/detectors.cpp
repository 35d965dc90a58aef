#include "courtguard/detectors.hpp"

#include <chrono>
#include <future>

namespace courtguard {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct CallOutcome {
    AgentTranscript transcript;
    std::optional<BackendError> error;
};

CallOutcome call(AgentRole role, const PromptTemplate& tmpl, std::string rendered,
                 const ChatBackend& backend) {
    CallOutcome out;
    out.transcript.role = role;
    out.transcript.rendered_prompt = std::move(rendered);
    ChatRequest req{tmpl.system_text, out.transcript.rendered_prompt, {}};
    const auto start = Clock::now();
    auto res = backend.complete(req);
    out.transcript.latency_s = seconds_since(start);
    if (!res.ok()) {
        out.error = std::move(res).error();
        return out;
    }
    out.transcript.completion = std::move(res.value().text);
    out.transcript.token_usage = res.value().usage;
    return out;
}

DetectorFailure failure(FailureKind kind, std::string message, const TemplateSet& templates,
                        Clock::time_point start) {
    DetectorFailure f;
    f.kind = kind;
    f.message = std::move(message);
    f.template_set_id = templates.id();
    f.total_latency_s = seconds_since(start);
    return f;
}

}  // namespace

std::string_view to_string(SystemKind s) { return s == SystemKind::court ? "court" : "direct"; }

std::optional<SystemKind> parse_system(std::string_view s) {
    if (s == "court") return SystemKind::court;
    if (s == "direct") return SystemKind::direct;
    return std::nullopt;
}

std::string_view to_string(FailureKind k) {
    switch (k) {
        case FailureKind::backend: return "backend";
        case FailureKind::parse: return "parse";
        case FailureKind::template_error: return "template";
    }
    return "backend";
}

DetectorResult classify_direct(std::string_view prompt, const TemplateSet& templates,
                               const ChatBackend& backend, const PatternTable& patterns) {
    const auto start = Clock::now();
    std::string rendered;
    const PromptTemplate* tmpl = nullptr;
    try {
        templates.validate(AgentRole::direct);
        tmpl = &templates.at(AgentRole::direct);
        rendered = tmpl->render({{"prompt", std::string(prompt)}});
    } catch (const TemplateError& e) {
        return failure(FailureKind::template_error, e.what(), templates, start);
    }

    auto outcome = call(AgentRole::direct, *tmpl, std::move(rendered), backend);
    if (outcome.error) {
        auto f = failure(FailureKind::backend, outcome.error->describe(), templates, start);
        f.backend_error = std::move(outcome.error);
        return f;
    }

    auto parsed = parse_verdict(outcome.transcript.completion, patterns);
    if (!parsed.ok()) {
        auto f = failure(FailureKind::parse, parsed.error().reason, templates, start);
        f.parse_failure = std::move(parsed).error();
        f.transcripts.push_back(std::move(outcome.transcript));
        return f;
    }
    DetectorRun run;
    run.verdict = std::move(parsed).value();
    run.transcripts.push_back(std::move(outcome.transcript));
    run.template_set_id = templates.id();
    run.total_latency_s = seconds_since(start);
    return run;
}

Result<AgentTranscript, BackendError> build_argument(AgentRole side, std::string_view prompt,
                                                     const TemplateSet& templates,
                                                     const ChatBackend& backend) {
    if (side != AgentRole::defense && side != AgentRole::prosecution) {
        throw TemplateError("build_argument needs the defense or prosecution role");
    }
    templates.validate(side);
    const auto& tmpl = templates.at(side);
    auto outcome = call(side, tmpl, tmpl.render({{"prompt", std::string(prompt)}}), backend);
    if (outcome.error) return std::move(*outcome.error);
    return std::move(outcome.transcript);
}

DetectorResult classify_court(std::string_view prompt, const TemplateSet& templates,
                              const ChatBackend& backend, const PatternTable& patterns) {
    const auto start = Clock::now();
    const std::string prompt_text(prompt);
    std::string defense_prompt;
    std::string prosecution_prompt;
    try {
        // Everything is checked before the first call so a malformed judge
        // template never costs two attorney calls.
        for (const auto role : {AgentRole::defense, AgentRole::prosecution, AgentRole::judge}) {
            templates.validate(role);
        }
        defense_prompt = templates.at(AgentRole::defense).render({{"prompt", prompt_text}});
        prosecution_prompt = templates.at(AgentRole::prosecution).render({{"prompt", prompt_text}});
    } catch (const TemplateError& e) {
        return failure(FailureKind::template_error, e.what(), templates, start);
    }

    auto prosecution_future =
        std::async(std::launch::async, [&, rendered = std::move(prosecution_prompt)]() mutable {
            return call(AgentRole::prosecution, templates.at(AgentRole::prosecution),
                        std::move(rendered), backend);
        });
    auto defense = call(AgentRole::defense, templates.at(AgentRole::defense),
                        std::move(defense_prompt), backend);
    auto prosecution = prosecution_future.get();

    std::vector<AgentTranscript> transcripts;
    std::optional<BackendError> attorney_error;
    for (auto* side : {&defense, &prosecution}) {
        if (side->error) {
            if (!attorney_error) attorney_error = side->error;
        } else {
            transcripts.push_back(side->transcript);
        }
    }
    if (attorney_error) {
        auto f = failure(FailureKind::backend, attorney_error->describe(), templates, start);
        f.backend_error = std::move(attorney_error);
        f.transcripts = std::move(transcripts);
        return f;
    }

    const auto& judge_tmpl = templates.at(AgentRole::judge);
    std::string judge_prompt;
    try {
        judge_prompt = judge_tmpl.render({{"prompt", prompt_text},
                                          {"defense_argument", defense.transcript.completion},
                                          {"prosecution_argument", prosecution.transcript.completion}});
    } catch (const TemplateError& e) {
        auto f = failure(FailureKind::template_error, e.what(), templates, start);
        f.transcripts = std::move(transcripts);
        return f;
    }

    auto judge = call(AgentRole::judge, judge_tmpl, std::move(judge_prompt), backend);
    if (judge.error) {
        auto f = failure(FailureKind::backend, judge.error->describe(), templates, start);
        f.backend_error = std::move(judge.error);
        f.transcripts = std::move(transcripts);
        return f;
    }
    auto parsed = parse_verdict(judge.transcript.completion, patterns);
    transcripts.push_back(std::move(judge.transcript));
    if (!parsed.ok()) {
        auto f = failure(FailureKind::parse, parsed.error().reason, templates, start);
        f.parse_failure = std::move(parsed).error();
        f.transcripts = std::move(transcripts);
        return f;
    }

    DetectorRun run;
    run.verdict = std::move(parsed).value();
    run.transcripts = std::move(transcripts);
    run.template_set_id = templates.id();
    run.total_latency_s = seconds_since(start);
    return run;
}

Detector::Detector(SystemKind system, std::shared_ptr<const ChatBackend> backend,
                   std::shared_ptr<const TemplateSet> templates,
                   std::shared_ptr<const PatternTable> patterns)
    : system_(system),
      backend_(std::move(backend)),
      templates_(std::move(templates)),
      patterns_(std::move(patterns)) {
    if (!backend_ || !templates_) throw std::invalid_argument("Detector needs a backend and templates");
}

DetectorResult Detector::classify(std::string_view prompt) const {
    return system_ == SystemKind::court ? classify_court(prompt, *templates_, *backend_, patterns())
                                        : classify_direct(prompt, *templates_, *backend_, patterns());
}

}  // namespace courtguard
