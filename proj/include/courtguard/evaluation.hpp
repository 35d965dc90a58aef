#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "courtguard/detectors.hpp"
#include "courtguard/types.hpp"

namespace courtguard {

class ReportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class OutcomeStatus { ok, failed };

struct EvalOutcome {
    std::string prompt_id;
    Classification truth = Classification::benign;
    OutcomeStatus status = OutcomeStatus::failed;
    std::optional<Classification> predicted;    // set iff status == ok
    std::optional<FailureKind> failure_kind;    // set iff status == failed
    ConfidenceLevel confidence = ConfidenceLevel::unspecified;
    std::string failure_message;
    double latency_s = 0.0;
    std::vector<AgentTranscript> transcripts;   // kept only on request
};

/// Positive class is injection. Only ok outcomes are counted.
struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }
    void add(Classification truth, Classification predicted);

    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Percentages in [0, 100]. nullopt marks an undefined value (zero
/// denominator); it is never replaced by 0.
struct Metrics {
    std::optional<double> accuracy;        // (tp+tn)/total: the per-dataset score
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    std::optional<double> benign_rate;     // tn/(tn+fp)
    std::optional<double> jailbreak_rate;  // tp/(tp+fn)
};

Metrics compute_metrics(const ConfusionCounts& counts);

/// Harmonic mean of two percentages; undefined if either input is
/// undefined or both are zero.
std::optional<double> f1_from(std::optional<double> precision, std::optional<double> recall);

inline constexpr std::string_view kAccuracyDefinition = "(tp+tn)/ok_outcomes";

struct EvalReport {
    std::string dataset;
    SystemKind system = SystemKind::direct;
    std::string model_name;
    std::string template_set_id;
    std::vector<EvalOutcome> outcomes;
    ConfusionCounts counts;
    Metrics metrics;
    std::uint64_t failed_count = 0;
    std::string timestamp;              // UTC, ISO 8601
    std::optional<std::uint64_t> seed;  // sampling seed, when the input was sampled
    std::string pattern_table_version;
};

struct EvalOptions {
    std::string dataset;
    std::size_t concurrency = 1;
    bool keep_transcripts = false;
    std::optional<std::uint64_t> seed;
};

/// Classifies every record with at most `concurrency` classifications in
/// flight. Outcomes keep input order. Failures are recorded, not thrown, and
/// never enter the counts. Throws std::invalid_argument if a record's label
/// is unknown or concurrency is zero.
EvalReport evaluate(std::span<const PromptRecord> records, const Detector& detector,
                    const EvalOptions& options);

/// Builds counts, metrics and failed_count from outcomes.
void tally(EvalReport& report);

enum class MetricColumn { score, precision, recall, f1, benign_rate, jailbreak_rate };
inline constexpr std::array<MetricColumn, 6> kMetricColumns{
    MetricColumn::score,       MetricColumn::precision,   MetricColumn::recall,
    MetricColumn::f1,          MetricColumn::benign_rate, MetricColumn::jailbreak_rate};

std::string_view column_name(MetricColumn c);
std::optional<double> metric_value(const Metrics& m, MetricColumn c);

/// One row of a CourtGuard minus Direct table.
struct DiffRow {
    std::string model_name;
    std::string dataset;
    std::array<std::optional<double>, kMetricColumns.size()> cells{};

    std::optional<double> at(MetricColumn c) const { return cells[static_cast<std::size_t>(c)]; }
};

/// court - direct per column; undefined on either side stays undefined.
DiffRow diff_metrics(const Metrics& court, const Metrics& direct);

/// Throws ReportError unless both reports cover the same dataset and model.
DiffRow diff_reports(const EvalReport& court, const EvalReport& direct);

struct DiffTable {
    std::vector<DiffRow> rows;

    /// Column means; a column with any undefined cell has an undefined mean.
    DiffRow mean() const;
};

enum class ReportFormat { markdown, csv, jsonl };

std::optional<ReportFormat> parse_format(std::string_view s);

/// Two-decimal percentage, "undefined" for nullopt, never "-0.00".
std::string format_percent(std::optional<double> v);

std::string render_report(const EvalReport& report, ReportFormat format);
std::string render_diff(const DiffTable& table, ReportFormat format);

/// Inverse of render_report(..., jsonl). Outcome lines are optional; the
/// trailer is required. Metrics are recomputed from the trailer's counts.
EvalReport parse_report_jsonl(std::string_view text);

}  // namespace courtguard
