#include "courtguard/cli.hpp"

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "courtguard/config.hpp"
#include "courtguard/datasets.hpp"
#include "courtguard/detectors.hpp"
#include "courtguard/evaluation.hpp"
#include "courtguard/service.hpp"

namespace courtguard {

namespace {

struct EngineFlags {
    std::string config;
    std::string base_url;
    std::string model;
    std::optional<double> temperature;
    std::optional<int> max_tokens;
    std::optional<double> timeout;
    std::optional<int> retries;
    std::string system;
    std::string templates;
    std::string patterns;
    std::optional<std::size_t> concurrency;
    std::string policy;
};

void add_engine_flags(CLI::App* cmd, EngineFlags& f) {
    cmd->add_option("--config", f.config, "Engine config file (key = value)");
    cmd->add_option("--base-url", f.base_url, "Chat-completion base URL, e.g. http://127.0.0.1:8080/v1");
    cmd->add_option("--model", f.model, "Model name sent to the backend");
    cmd->add_option("--temperature", f.temperature, "Sampling temperature (default 0)");
    cmd->add_option("--max-tokens", f.max_tokens, "Max output tokens per call (default 1024)");
    cmd->add_option("--timeout", f.timeout, "Per-request timeout in seconds (default 120)");
    cmd->add_option("--retries", f.retries, "Retries on transport errors and 5xx (default 2)");
    cmd->add_option("--system", f.system, "Detector: direct or court")->check(CLI::IsMember({"direct", "court"}));
    cmd->add_option("--templates", f.templates, "Template set directory (default: built-in set)");
    cmd->add_option("--patterns", f.patterns, "Verdict pattern table (default: built-in table)");
    cmd->add_option("--concurrency", f.concurrency, "Classifications in flight at once");
}

EngineConfig build_config(const EngineFlags& f) {
    EngineConfig cfg = f.config.empty() ? EngineConfig{} : load_engine_config(f.config);
    apply_env_overrides(cfg, process_env);
    if (!f.base_url.empty()) cfg.backend.base_url = f.base_url;
    if (!f.model.empty()) cfg.backend.model_name = f.model;
    if (f.temperature) cfg.backend.temperature = *f.temperature;
    if (f.max_tokens) cfg.backend.max_output_tokens = *f.max_tokens;
    if (f.timeout) cfg.backend.request_timeout_s = *f.timeout;
    if (f.retries) cfg.backend.max_retries = *f.retries;
    if (!f.system.empty()) cfg.system = *parse_system(f.system);
    if (!f.templates.empty()) cfg.templates = f.templates;
    if (!f.patterns.empty()) cfg.patterns = f.patterns;
    if (f.concurrency) cfg.concurrency = *f.concurrency;
    if (!f.policy.empty()) {
        const auto p = parse_policy(f.policy);
        if (!p) throw ConfigError("policy must be fail_open or fail_closed");
        cfg.policy = *p;
    }
    cfg.validate();
    return cfg;
}

std::shared_ptr<const Detector> build_detector(const EngineConfig& cfg) {
    auto backend = std::make_shared<HttpChatBackend>(cfg.backend);
    auto templates = cfg.templates ? std::make_shared<TemplateSet>(TemplateSet::load(*cfg.templates))
                                   : std::make_shared<TemplateSet>(TemplateSet::builtin());
    std::shared_ptr<const PatternTable> patterns;
    if (cfg.patterns) patterns = std::make_shared<PatternTable>(PatternTable::load(*cfg.patterns));
    return std::make_shared<Detector>(cfg.system, std::move(backend), std::move(templates),
                                      std::move(patterns));
}

std::string read_all(std::istream& in) {
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path);
    return read_all(in);
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path);
    out << text;
}

struct CorpusFlags {
    std::string corpus;
    std::string schema = "mixed";
    std::string name;
    std::string default_label;
};

void add_corpus_flags(CLI::App* cmd, CorpusFlags& f) {
    cmd->add_option("--corpus", f.corpus, "Corpus file (.jsonl, or .csv with a header row)")->required();
    cmd->add_option("--schema", f.schema, "llmail, notinject or mixed")
        ->check(CLI::IsMember({"llmail", "notinject", "mixed"}));
    cmd->add_option("--name", f.name, "Corpus name recorded as each record's source (default: file stem)");
    cmd->add_option("--default-label", f.default_label, "Label for mixed rows without one")
        ->check(CLI::IsMember({"injection", "benign"}));
}

std::vector<PromptRecord> load(const CorpusFlags& f) {
    CorpusSpec spec;
    spec.path = f.corpus;
    spec.name = f.name.empty() ? spec.path.stem().string() : f.name;
    spec.schema = *parse_schema(f.schema);
    if (!f.default_label.empty()) spec.default_label = parse_classification(f.default_label);
    return load_corpus(spec);
}

struct SampleFlags {
    std::string spec_file;
    std::optional<std::size_t> total;
    std::uint64_t seed = 0;
    std::string stratum_key = "stratum";
    std::size_t reserve_per_stratum = 0;
    std::size_t reserve_total = 0;
    std::string purpose = "prompt-refinement";
};

void add_sample_flags(CLI::App* cmd, SampleFlags& f) {
    cmd->add_option("--spec", f.spec_file, "Sample spec JSON (see configs/)");
    cmd->add_option("--total", f.total, "Records in the evaluation sample");
    cmd->add_option("--seed", f.seed, "SplitMix64 seed");
    cmd->add_option("--stratum-key", f.stratum_key, "stratum, source, label, or empty for none");
    cmd->add_option("--reserve-per-stratum", f.reserve_per_stratum, "Records reserved from each stratum");
    cmd->add_option("--reserve-total", f.reserve_total, "Records reserved overall, apportioned by stratum");
    cmd->add_option("--purpose", f.purpose, "Tag recorded for the reservation");
}

std::optional<SampleSpec> sample_spec(const SampleFlags& f) {
    if (!f.spec_file.empty()) return SampleSpec::from_json(nlohmann::json::parse(read_file(f.spec_file)));
    if (!f.total) return std::nullopt;
    SampleSpec spec;
    spec.total = *f.total;
    spec.seed = f.seed;
    spec.stratum_key = f.stratum_key;
    if (f.reserve_per_stratum > 0 && f.reserve_total > 0) {
        throw ConfigError("use either --reserve-per-stratum or --reserve-total, not both");
    }
    if (f.reserve_per_stratum > 0 || f.reserve_total > 0) {
        spec.reserve = ReserveSpec{f.reserve_per_stratum, f.reserve_total, f.purpose};
    }
    return spec;
}

void print_transcripts(std::ostream& out, const std::vector<AgentTranscript>& transcripts) {
    for (const auto& t : transcripts) {
        char latency[32];
        std::snprintf(latency, sizeof latency, "%.2fs", t.latency_s);
        out << "----- " << to_string(t.role) << " (" << latency << ") -----\n" << t.completion << "\n";
    }
}

ScreeningService* g_service = nullptr;

void handle_signal(int) {
    if (g_service) g_service->stop();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err) {
    CLI::App app{"courtguard: prompt-injection screening with a direct judge or a three-agent court"};
    app.require_subcommand(1);

    // classify
    EngineFlags classify_flags;
    std::string prompt_arg;
    bool show_transcripts = false;
    bool as_json = false;
    auto* classify = app.add_subcommand("classify", "Classify one prompt (argument, or stdin when omitted or '-')");
    add_engine_flags(classify, classify_flags);
    classify->add_option("prompt", prompt_arg, "Prompt text");
    classify->add_flag("--transcripts", show_transcripts, "Print every agent's completion");
    classify->add_flag("--json", as_json, "Print the run as JSON");

    // eval
    EngineFlags eval_flags;
    CorpusFlags eval_corpus;
    SampleFlags eval_sample;
    std::string eval_manifest;
    std::string eval_out;
    std::string eval_format = "markdown";
    bool eval_transcripts = false;
    auto* eval = app.add_subcommand("eval", "Evaluate a detector over a labeled corpus");
    add_engine_flags(eval, eval_flags);
    add_corpus_flags(eval, eval_corpus);
    add_sample_flags(eval, eval_sample);
    eval->add_option("--manifest", eval_manifest, "Evaluate the 'sample' partition of this manifest");
    eval->add_option("--out", eval_out, "Write the JSONL report here");
    eval->add_option("--format", eval_format, "Summary printed to stdout")
        ->check(CLI::IsMember({"markdown", "csv", "jsonl"}));
    eval->add_flag("--transcripts", eval_transcripts, "Keep full agent transcripts in the report");

    // sample
    CorpusFlags sample_corpus;
    SampleFlags sample_flags;
    std::string sample_out;
    auto* sample = app.add_subcommand("sample", "Stratified, seeded sample of a corpus -> manifest");
    add_corpus_flags(sample, sample_corpus);
    add_sample_flags(sample, sample_flags);
    sample->add_option("--out", sample_out, "Manifest path (default stdout)");

    // report
    std::string report_format = "markdown";
    std::string report_out;
    std::string render_path;
    std::vector<std::string> diff_paths;
    auto* report = app.add_subcommand("report", "Render saved reports or CourtGuard-minus-Direct diffs");
    report->require_subcommand(1);
    report->fallthrough();
    report->add_option("--format", report_format, "markdown, csv or jsonl")
        ->check(CLI::IsMember({"markdown", "csv", "jsonl"}));
    report->add_option("--out", report_out, "Write here instead of stdout");
    auto* render = report->add_subcommand("render", "Render one report");
    render->add_option("report", render_path, "JSONL report")->required();
    auto* diff = report->add_subcommand("diff", "court.jsonl direct.jsonl [court2.jsonl direct2.jsonl ...]");
    diff->add_option("reports", diff_paths, "Pairs of court and direct reports")->required();

    // serve
    EngineFlags serve_flags;
    std::string bind;
    bool warn_only = false;
    auto* serve = app.add_subcommand("serve", "Run the HTTP screening endpoint");
    add_engine_flags(serve, serve_flags);
    serve->add_option("--bind", bind, "host:port (default from config, 127.0.0.1:8787)");
    serve->add_option("--policy", serve_flags.policy, "fail_open or fail_closed (default fail_closed)");
    serve->add_flag("--warn-only", warn_only, "Start even if the backend healthcheck fails");

    // healthcheck
    EngineFlags health_flags;
    auto* health = app.add_subcommand("healthcheck", "Check that the backend answers");
    add_engine_flags(health, health_flags);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (classify->parsed()) {
            const auto cfg = build_config(classify_flags);
            const auto detector = build_detector(cfg);
            std::string prompt = prompt_arg;
            if (prompt.empty() || prompt == "-") prompt = read_all(in);
            if (!has_content(prompt)) {
                err << "classify: prompt is empty\n";
                return kExitUsage;
            }
            const auto result = detector->classify(prompt);
            const auto& transcripts = result.ok() ? result->transcripts : result.error().transcripts;
            if (as_json) {
                nlohmann::json j{{"system", to_string(detector->system())},
                                 {"template_set_id", detector->template_set_id()},
                                 {"ok", result.ok()}};
                if (result.ok()) {
                    j["classification"] = to_string(result->verdict.classification);
                    j["confidence"] = to_string(result->verdict.confidence);
                } else {
                    j["failure_kind"] = to_string(result.error().kind);
                    j["failure"] = result.error().message;
                }
                if (show_transcripts) {
                    auto& arr = j["transcripts"] = nlohmann::json::array();
                    for (const auto& t : transcripts) {
                        arr.push_back({{"role", to_string(t.role)},
                                       {"completion", t.completion},
                                       {"latency_s", t.latency_s}});
                    }
                }
                out << j.dump(2) << "\n";
            } else {
                if (show_transcripts) print_transcripts(out, transcripts);
                if (result.ok()) {
                    out << to_string(result->verdict.classification) << " ("
                        << to_string(result->verdict.confidence) << ")\n";
                } else {
                    err << "failed: " << to_string(result.error().kind) << ": " << result.error().message
                        << "\n";
                }
            }
            if (!result.ok()) return kExitFailure;
            return result->verdict.classification == Classification::injection ? kExitInjection
                                                                                  : kExitOk;
        }

        if (eval->parsed()) {
            const auto cfg = build_config(eval_flags);
            const auto detector = build_detector(cfg);
            auto records = load(eval_corpus);
            std::optional<std::uint64_t> seed;
            if (!eval_manifest.empty()) {
                const auto manifest = parse_manifest(read_file(eval_manifest));
                records = select_partition(records, manifest, Partition::sample);
                if (manifest.header.contains("spec")) {
                    seed = manifest.header["spec"].value("seed", std::uint64_t{0});
                }
            } else if (const auto spec = sample_spec(eval_sample)) {
                records = stratified_sample(records, *spec).sample;
                seed = spec->seed;
            }
            EvalOptions opts;
            opts.dataset = eval_corpus.name.empty() ? std::filesystem::path(eval_corpus.corpus).stem().string()
                                                    : eval_corpus.name;
            opts.concurrency = cfg.concurrency;
            opts.keep_transcripts = eval_transcripts;
            opts.seed = seed;
            const auto rep = evaluate(records, *detector, opts);
            if (!eval_out.empty()) write_file(eval_out, render_report(rep, ReportFormat::jsonl));
            out << render_report(rep, *parse_format(eval_format));
            return kExitOk;
        }

        if (sample->parsed()) {
            const auto spec = sample_spec(sample_flags);
            if (!spec) throw ConfigError("sample needs --spec or --total");
            const auto records = load(sample_corpus);
            const auto result = stratified_sample(records, *spec);
            const auto name = sample_corpus.name.empty()
                                  ? std::filesystem::path(sample_corpus.corpus).stem().string()
                                  : sample_corpus.name;
            const auto text = write_manifest(result, *spec, name);
            if (sample_out.empty()) {
                out << text;
            } else {
                write_file(sample_out, text);
                out << "sample=" << result.sample.size() << " reserved=" << result.reserved.size()
                    << " remainder=" << result.remainder.size() << "\n";
            }
            return kExitOk;
        }

        if (report->parsed()) {
            const auto format = *parse_format(report_format);
            std::string text;
            if (render->parsed()) {
                text = render_report(parse_report_jsonl(read_file(render_path)), format);
            } else {
                if (diff_paths.size() % 2 != 0) {
                    err << "report diff: expected pairs of court and direct reports\n";
                    return kExitUsage;
                }
                DiffTable table;
                for (std::size_t i = 0; i < diff_paths.size(); i += 2) {
                    const auto court = parse_report_jsonl(read_file(diff_paths[i]));
                    const auto direct = parse_report_jsonl(read_file(diff_paths[i + 1]));
                    table.rows.push_back(diff_reports(court, direct));
                }
                text = render_diff(table, format);
            }
            if (report_out.empty()) {
                out << text;
            } else {
                write_file(report_out, text);
            }
            return kExitOk;
        }

        if (serve->parsed()) {
            auto cfg = build_config(serve_flags);
            if (!bind.empty()) cfg.bind = bind;
            cfg.validate();
            const auto detector = build_detector(cfg);
            if (auto hc = healthcheck(cfg.backend); !hc.ok()) {
                if (!warn_only) {
                    err << "backend healthcheck failed: " << hc.error().describe()
                        << " (use --warn-only to start anyway)\n";
                    return kExitFailure;
                }
                spdlog::warn("backend healthcheck failed: {}", hc.error().describe());
            }
            const auto colon = cfg.bind.rfind(':');
            const auto host = cfg.bind.substr(0, colon);
            const int port = std::stoi(cfg.bind.substr(colon + 1));
            ScreeningService service(detector, cfg.policy, cfg.concurrency);
            const int bound = service.bind(host, port);
            if (bound < 0) {
                err << "cannot bind " << cfg.bind << "\n";
                return kExitUsage;
            }
            g_service = &service;
            std::signal(SIGINT, handle_signal);
            std::signal(SIGTERM, handle_signal);
            spdlog::info("screening on {}:{} ({} detector, {} policy, concurrency {})", host, bound,
                         to_string(cfg.system), to_string(cfg.policy), cfg.concurrency);
            service.listen();
            g_service = nullptr;
            return kExitOk;
        }

        if (health->parsed()) {
            const auto cfg = build_config(health_flags);
            const auto hc = healthcheck(cfg.backend);
            if (!hc.ok()) {
                err << "unhealthy: " << hc.error().describe() << "\n";
                return kExitFailure;
            }
            out << "ok " << cfg.backend.base_url << " model=" << cfg.backend.model_name << "\n";
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace courtguard
