#include "courtguard/evaluation.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace courtguard {

namespace {

std::optional<double> percent(std::uint64_t num, std::uint64_t den) {
    if (den == 0) return std::nullopt;
    return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

EvalOutcome to_outcome(const PromptRecord& rec, Classification truth, DetectorResult result,
                       bool keep_transcripts) {
    EvalOutcome out;
    out.prompt_id = rec.id;
    out.truth = truth;
    if (result.ok()) {
        auto& run = result.value();
        out.status = OutcomeStatus::ok;
        out.predicted = verdict_to_binary(run.verdict);
        out.confidence = run.verdict.confidence;
        out.latency_s = run.total_latency_s;
        if (keep_transcripts) out.transcripts = std::move(run.transcripts);
    } else {
        auto& failure = result.error();
        out.status = OutcomeStatus::failed;
        out.failure_kind = failure.kind;
        out.failure_message = failure.message;
        out.latency_s = failure.total_latency_s;
        if (keep_transcripts) out.transcripts = std::move(failure.transcripts);
    }
    return out;
}

nlohmann::json optional_number(std::optional<double> v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json transcript_json(const AgentTranscript& t) {
    nlohmann::json j{{"role", to_string(t.role)},
                     {"rendered_prompt", t.rendered_prompt},
                     {"completion", t.completion},
                     {"latency_s", t.latency_s}};
    if (t.token_usage) {
        j["token_usage"] = {{"prompt_tokens", t.token_usage->prompt_tokens},
                            {"completion_tokens", t.token_usage->completion_tokens}};
    }
    return j;
}

AgentTranscript transcript_from(const nlohmann::json& j) {
    AgentTranscript t;
    const auto role = parse_role(j.value("role", ""));
    if (!role) throw ReportError("transcript with unknown role");
    t.role = *role;
    t.rendered_prompt = j.value("rendered_prompt", "");
    t.completion = j.value("completion", "");
    t.latency_s = j.value("latency_s", 0.0);
    if (j.contains("token_usage") && j["token_usage"].is_object()) {
        t.token_usage = TokenUsage{j["token_usage"].value("prompt_tokens", std::int64_t{0}),
                                   j["token_usage"].value("completion_tokens", std::int64_t{0})};
    }
    return t;
}

nlohmann::json outcome_json(const EvalOutcome& o) {
    nlohmann::json j{{"type", "outcome"},
                     {"prompt_id", o.prompt_id},
                     {"truth", to_string(o.truth)},
                     {"status", o.status == OutcomeStatus::ok ? "ok" : "failed"},
                     {"latency_s", o.latency_s}};
    j["predicted"] = o.predicted ? nlohmann::json(to_string(*o.predicted)) : nlohmann::json(nullptr);
    j["confidence"] = to_string(o.confidence);
    j["failure_kind"] =
        o.failure_kind ? nlohmann::json(to_string(*o.failure_kind)) : nlohmann::json(nullptr);
    if (!o.failure_message.empty()) j["failure_message"] = o.failure_message;
    if (!o.transcripts.empty()) {
        auto& arr = j["transcripts"] = nlohmann::json::array();
        for (const auto& t : o.transcripts) arr.push_back(transcript_json(t));
    }
    return j;
}

std::optional<FailureKind> parse_failure_kind(std::string_view s) {
    if (s == "backend") return FailureKind::backend;
    if (s == "parse") return FailureKind::parse;
    if (s == "template") return FailureKind::template_error;
    return std::nullopt;
}

EvalOutcome outcome_from(const nlohmann::json& j) {
    EvalOutcome o;
    o.prompt_id = j.value("prompt_id", "");
    const auto truth = parse_classification(j.value("truth", ""));
    if (!truth) throw ReportError("outcome " + o.prompt_id + " has no valid truth");
    o.truth = *truth;
    const std::string status = j.value("status", "");
    if (status == "ok") {
        o.status = OutcomeStatus::ok;
        const auto predicted = j.contains("predicted") && j["predicted"].is_string()
                                   ? parse_classification(j["predicted"].get<std::string>())
                                   : std::nullopt;
        if (!predicted) throw ReportError("ok outcome " + o.prompt_id + " has no prediction");
        o.predicted = predicted;
    } else if (status == "failed") {
        o.status = OutcomeStatus::failed;
        const auto kind = j.contains("failure_kind") && j["failure_kind"].is_string()
                              ? parse_failure_kind(j["failure_kind"].get<std::string>())
                              : std::nullopt;
        if (!kind) throw ReportError("failed outcome " + o.prompt_id + " has no failure kind");
        o.failure_kind = kind;
        o.failure_message = j.value("failure_message", "");
    } else {
        throw ReportError("outcome " + o.prompt_id + " has unknown status '" + status + "'");
    }
    o.confidence = parse_confidence(j.value("confidence", "unspecified")).value_or(ConfidenceLevel::unspecified);
    o.latency_s = j.value("latency_s", 0.0);
    if (j.contains("transcripts")) {
        for (const auto& t : j["transcripts"]) o.transcripts.push_back(transcript_from(t));
    }
    return o;
}

nlohmann::json metrics_json(const Metrics& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto c : kMetricColumns) j[std::string(column_name(c))] = optional_number(metric_value(m, c));
    return j;
}

std::string csv_cell(std::optional<double> v) {
    if (!v) return "";
    return format_percent(v);
}

std::string markdown_header(std::initializer_list<std::string_view> lead) {
    std::string head = "|";
    std::string rule = "|";
    for (const auto name : lead) {
        head += " " + std::string(name) + " |";
        rule += "---|";
    }
    for (const auto c : kMetricColumns) {
        head += " " + std::string(column_name(c)) + " (%) |";
        rule += "---:|";
    }
    return head + "\n" + rule + "\n";
}

}  // namespace

void ConfusionCounts::add(Classification truth, Classification predicted) {
    const bool positive_truth = truth == Classification::injection;
    const bool positive_pred = predicted == Classification::injection;
    if (positive_truth && positive_pred) ++tp;
    else if (!positive_truth && positive_pred) ++fp;
    else if (!positive_truth && !positive_pred) ++tn;
    else ++fn;
}

std::optional<double> f1_from(std::optional<double> precision, std::optional<double> recall) {
    if (!precision || !recall) return std::nullopt;
    const double sum = *precision + *recall;
    if (sum == 0.0) return std::nullopt;
    return 2.0 * *precision * *recall / sum;
}

Metrics compute_metrics(const ConfusionCounts& c) {
    Metrics m;
    m.precision = percent(c.tp, c.tp + c.fp);
    m.recall = percent(c.tp, c.tp + c.fn);
    m.f1 = f1_from(m.precision, m.recall);
    m.accuracy = percent(c.tp + c.tn, c.total());
    m.benign_rate = percent(c.tn, c.tn + c.fp);
    m.jailbreak_rate = m.recall;
    return m;
}

void tally(EvalReport& report) {
    report.counts = {};
    report.failed_count = 0;
    for (const auto& o : report.outcomes) {
        if (o.status == OutcomeStatus::ok) {
            report.counts.add(o.truth, *o.predicted);
        } else {
            ++report.failed_count;
        }
    }
    report.metrics = compute_metrics(report.counts);
}

EvalReport evaluate(std::span<const PromptRecord> records, const Detector& detector,
                    const EvalOptions& options) {
    if (options.concurrency == 0) throw std::invalid_argument("concurrency limit must be >= 1");
    std::vector<Classification> truths;
    truths.reserve(records.size());
    for (const auto& r : records) {
        const auto truth = to_classification(r.label);
        if (!truth) throw std::invalid_argument("record " + r.id + " has an unknown label");
        truths.push_back(*truth);
    }

    std::vector<EvalOutcome> outcomes(records.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < records.size(); i = next.fetch_add(1)) {
            outcomes[i] = to_outcome(records[i], truths[i], detector.classify(records[i].text),
                                     options.keep_transcripts);
        }
    };
    const std::size_t threads = std::min(options.concurrency, records.size());
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    EvalReport report;
    report.dataset = options.dataset;
    report.system = detector.system();
    report.model_name = detector.model_name();
    report.template_set_id = detector.template_set_id();
    report.outcomes = std::move(outcomes);
    report.timestamp = utc_now();
    report.seed = options.seed;
    report.pattern_table_version = detector.patterns().version();
    tally(report);
    return report;
}

std::string_view column_name(MetricColumn c) {
    switch (c) {
        case MetricColumn::score: return "score";
        case MetricColumn::precision: return "precision";
        case MetricColumn::recall: return "recall";
        case MetricColumn::f1: return "f1";
        case MetricColumn::benign_rate: return "benign_rate";
        case MetricColumn::jailbreak_rate: return "jailbreak_rate";
    }
    return "score";
}

std::optional<double> metric_value(const Metrics& m, MetricColumn c) {
    switch (c) {
        case MetricColumn::score: return m.accuracy;
        case MetricColumn::precision: return m.precision;
        case MetricColumn::recall: return m.recall;
        case MetricColumn::f1: return m.f1;
        case MetricColumn::benign_rate: return m.benign_rate;
        case MetricColumn::jailbreak_rate: return m.jailbreak_rate;
    }
    return std::nullopt;
}

DiffRow diff_metrics(const Metrics& court, const Metrics& direct) {
    DiffRow row;
    for (std::size_t i = 0; i < kMetricColumns.size(); ++i) {
        const auto a = metric_value(court, kMetricColumns[i]);
        const auto b = metric_value(direct, kMetricColumns[i]);
        if (a && b) row.cells[i] = *a - *b;
    }
    return row;
}

DiffRow diff_reports(const EvalReport& court, const EvalReport& direct) {
    if (court.dataset != direct.dataset) {
        throw ReportError("cannot diff reports over different datasets: '" + court.dataset + "' vs '" +
                          direct.dataset + "'");
    }
    if (court.model_name != direct.model_name) {
        throw ReportError("cannot diff reports from different models: '" + court.model_name +
                          "' vs '" + direct.model_name + "'");
    }
    auto row = diff_metrics(court.metrics, direct.metrics);
    row.model_name = court.model_name;
    row.dataset = court.dataset;
    return row;
}

DiffRow DiffTable::mean() const {
    DiffRow out;
    out.model_name = "Mean";
    if (rows.empty()) return out;
    for (std::size_t i = 0; i < kMetricColumns.size(); ++i) {
        double sum = 0.0;
        bool defined = true;
        for (const auto& r : rows) {
            if (!r.cells[i]) {
                defined = false;
                break;
            }
            sum += *r.cells[i];
        }
        if (defined) out.cells[i] = sum / static_cast<double>(rows.size());
    }
    return out;
}

std::optional<ReportFormat> parse_format(std::string_view s) {
    if (s == "markdown" || s == "md") return ReportFormat::markdown;
    if (s == "csv") return ReportFormat::csv;
    if (s == "jsonl") return ReportFormat::jsonl;
    return std::nullopt;
}

std::string format_percent(std::optional<double> v) {
    if (!v) return "undefined";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", *v);
    std::string s = buf;
    if (s == "-0.00") s = "0.00";
    return s;
}

std::string render_report(const EvalReport& r, ReportFormat format) {
    switch (format) {
        case ReportFormat::markdown: {
            std::string out = markdown_header({"Model", "System", "Dataset"});
            out += "| " + r.model_name + " | " + std::string(to_string(r.system)) + " | " + r.dataset + " |";
            for (const auto c : kMetricColumns) out += " " + format_percent(metric_value(r.metrics, c)) + " |";
            out += "\n\n";
            out += "tp=" + std::to_string(r.counts.tp) + " fp=" + std::to_string(r.counts.fp) +
                   " tn=" + std::to_string(r.counts.tn) + " fn=" + std::to_string(r.counts.fn) +
                   " (scored " + std::to_string(r.counts.total()) + ", templates " + r.template_set_id + ")\n";
            if (r.failed_count > 0) {
                out += "\n* " + std::to_string(r.failed_count) +
                       (r.failed_count == 1 ? " prompt" : " prompts") +
                       " failed to run and were not included in percentage calculations.\n";
            }
            return out;
        }
        case ReportFormat::csv: {
            std::string out = "model,system,dataset";
            for (const auto c : kMetricColumns) out += "," + std::string(column_name(c));
            out += ",tp,fp,tn,fn,failed\n";
            out += r.model_name + "," + std::string(to_string(r.system)) + "," + r.dataset;
            for (const auto c : kMetricColumns) out += "," + csv_cell(metric_value(r.metrics, c));
            out += "," + std::to_string(r.counts.tp) + "," + std::to_string(r.counts.fp) + "," +
                   std::to_string(r.counts.tn) + "," + std::to_string(r.counts.fn) + "," +
                   std::to_string(r.failed_count) + "\n";
            return out;
        }
        case ReportFormat::jsonl: {
            std::string out;
            for (const auto& o : r.outcomes) out += outcome_json(o).dump() + "\n";
            nlohmann::json trailer{
                {"type", "summary"},
                {"dataset", r.dataset},
                {"system", to_string(r.system)},
                {"model_name", r.model_name},
                {"template_set_id", r.template_set_id},
                {"counts", {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"tn", r.counts.tn}, {"fn", r.counts.fn}}},
                {"metrics", metrics_json(r.metrics)},
                {"failed_count", r.failed_count},
                {"timestamp", r.timestamp},
                {"accuracy_definition", kAccuracyDefinition},
                {"pattern_table_version", r.pattern_table_version},
            };
            trailer["seed"] = r.seed ? nlohmann::json(*r.seed) : nlohmann::json(nullptr);
            out += trailer.dump() + "\n";
            return out;
        }
    }
    return {};
}

std::string render_diff(const DiffTable& table, ReportFormat format) {
    const auto rows_with_mean = [&] {
        auto rows = table.rows;
        if (rows.size() >= 2) rows.push_back(table.mean());
        return rows;
    }();
    switch (format) {
        case ReportFormat::markdown: {
            std::string out = markdown_header({"Model", "Dataset"});
            for (const auto& row : rows_with_mean) {
                out += "| " + row.model_name + " | " + row.dataset + " |";
                for (const auto& cell : row.cells) out += " " + format_percent(cell) + " |";
                out += "\n";
            }
            return out;
        }
        case ReportFormat::csv: {
            std::string out = "model,dataset";
            for (const auto c : kMetricColumns) out += "," + std::string(column_name(c));
            out += "\n";
            for (const auto& row : rows_with_mean) {
                out += row.model_name + "," + row.dataset;
                for (const auto& cell : row.cells) out += "," + csv_cell(cell);
                out += "\n";
            }
            return out;
        }
        case ReportFormat::jsonl: {
            std::string out;
            for (const auto& row : rows_with_mean) {
                nlohmann::json j{{"type", "diff"}, {"model_name", row.model_name}, {"dataset", row.dataset}};
                for (std::size_t i = 0; i < kMetricColumns.size(); ++i) {
                    j[std::string(column_name(kMetricColumns[i]))] = optional_number(row.cells[i]);
                }
                out += j.dump() + "\n";
            }
            return out;
        }
    }
    return {};
}

EvalReport parse_report_jsonl(std::string_view text) {
    EvalReport r;
    std::optional<nlohmann::json> trailer;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (!has_content(line)) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw ReportError("invalid report line");
        const std::string type = j.value("type", "");
        if (type == "outcome") {
            if (trailer) throw ReportError("outcome after summary line");
            r.outcomes.push_back(outcome_from(j));
        } else if (type == "summary") {
            if (trailer) throw ReportError("more than one summary line");
            trailer = std::move(j);
        } else {
            throw ReportError("unknown report line type '" + type + "'");
        }
    }
    if (!trailer) throw ReportError("report has no summary line");
    const auto& t = *trailer;
    r.dataset = t.value("dataset", "");
    const auto system = parse_system(t.value("system", ""));
    if (!system) throw ReportError("report summary has no valid system");
    r.system = *system;
    r.model_name = t.value("model_name", "");
    r.template_set_id = t.value("template_set_id", "");
    r.timestamp = t.value("timestamp", "");
    r.pattern_table_version = t.value("pattern_table_version", "");
    if (t.contains("seed") && t["seed"].is_number_unsigned()) r.seed = t["seed"].get<std::uint64_t>();
    if (!t.contains("counts") || !t["counts"].is_object()) throw ReportError("report summary has no counts");
    const auto& c = t["counts"];
    r.counts = {c.value("tp", std::uint64_t{0}), c.value("fp", std::uint64_t{0}),
                c.value("tn", std::uint64_t{0}), c.value("fn", std::uint64_t{0})};
    r.failed_count = t.value("failed_count", std::uint64_t{0});
    r.metrics = compute_metrics(r.counts);

    if (!r.outcomes.empty()) {
        EvalReport check;
        check.outcomes = r.outcomes;
        tally(check);
        if (!(check.counts == r.counts) || check.failed_count != r.failed_count) {
            throw ReportError("report summary counts disagree with its outcome lines");
        }
    }
    return r;
}

}  // namespace courtguard
