// Acceptance checks AC1..AC8. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fail.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "courtguard/cli.hpp"
#include "courtguard/datasets.hpp"
#include "courtguard/evaluation.hpp"
#include "courtguard/verdict_parser.hpp"
#include "mock_chat_server.hpp"

using namespace courtguard;
using namespace courtguard::test_support;

namespace {

struct Check {
    bool ok = true;
    std::vector<std::string> notes;

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            notes.push_back(what);
        }
    }
};

std::string fixture(const std::string& rel) { return std::string(COURTGUARD_FIXTURES) + "/" + rel; }

std::string read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

Completion text(std::string s) {
    Completion c;
    c.text = std::move(s);
    return c;
}

// Tolerance comparisons allow one ulp-scale slack so that a printed value
// exactly on the boundary counts as inside it.
bool within(double got, double want, double tol) { return std::fabs(got - want) <= tol + 1e-9; }

// Counts whose precision and recall match the given percentages to ~1e-6.
ConfusionCounts counts_for(double precision, double recall) {
    const std::uint64_t scale = 1000;
    const auto tp = static_cast<std::uint64_t>(std::llround(recall * 100)) * scale;
    const auto fn = static_cast<std::uint64_t>(std::llround((100 - recall) * 100)) * scale;
    const auto fp = static_cast<std::uint64_t>(std::llround(static_cast<double>(tp) * (100 - precision) / precision));
    return {tp, fp, 0, fn};
}

struct PrfRow {
    const char* model;
    const char* system;
    double precision, recall, f1;
};

const PrfRow kPrfRows[] = {
    {"gemma3-12b-it", "direct", 53.26, 99.54, 69.40}, {"gemma3-12b-it", "court", 59.26, 83.10, 69.18},
    {"llama-3.3-8b", "direct", 75.02, 59.78, 66.54},  {"llama-3.3-8b", "court", 67.00, 33.96, 45.07},
    {"phi4-mini", "direct", 86.05, 38.22, 52.93},     {"phi4-mini", "court", 87.38, 32.39, 47.27},
};

Check ac1() {
    Check c;
    for (const auto& row : kPrfRows) {
        const auto via_pr = f1_from(row.precision, row.recall);
        const auto m = compute_metrics(counts_for(row.precision, row.recall));
        const std::string tag = std::string(row.model) + "/" + row.system;
        c.expect(via_pr && within(*via_pr, row.f1, 0.015), tag + " f1_from=" + (via_pr ? fmt(*via_pr) : "undef"));
        c.expect(m.f1 && within(*m.f1, row.f1, 0.015), tag + " compute_metrics f1=" + (m.f1 ? fmt(*m.f1) : "undef"));
    }
    return c;
}

EvalReport report_with(const std::string& model, const std::string& dataset, SystemKind system, Metrics m) {
    EvalReport r;
    r.model_name = model;
    r.dataset = dataset;
    r.system = system;
    r.metrics = m;
    return r;
}

Check ac2() {
    Check c;
    struct Scores {
        const char* model;
        double direct[4];  // LLMail score, NotInject score, Qualifire benign, Qualifire jailbreak
        double court[4];
        double expected[4];
    };
    const Scores table[] = {
        {"gemma3-12b-it", {95.68, 58.48, 41.86, 98.59}, {73.81, 73.64, 48.48, 64.68}, {-21.87, 15.15, 6.62, -33.91}},
        {"llama-3.3-8b", {59.82, 90.61, 86.67, 59.78}, {14.88, 94.55, 88.20, 33.52}, {-44.94, 3.94, 1.53, -26.26}},
        {"phi4-mini", {17.42, 99.09, 94.57, 48.12}, {25.63, 99.09, 96.77, 32.22}, {8.21, 0.00, 2.20, -15.91}},
    };
    const double score_diff_mean[4] = {-19.53, 6.36, 3.45, -25.36};

    std::vector<DiffTable> columns(4);
    for (const auto& s : table) {
        for (int col = 0; col < 4; ++col) {
            Metrics court, direct;
            MetricColumn mc = MetricColumn::score;
            if (col == 2) mc = MetricColumn::benign_rate;
            if (col == 3) mc = MetricColumn::jailbreak_rate;
            const std::string dataset = col == 0 ? "LLMail" : col == 1 ? "NotInject" : "Qualifire";
            auto set = [&](Metrics& m, double v) {
                if (mc == MetricColumn::score) m.accuracy = v;
                if (mc == MetricColumn::benign_rate) m.benign_rate = v;
                if (mc == MetricColumn::jailbreak_rate) m.jailbreak_rate = v;
            };
            set(court, s.court[col]);
            set(direct, s.direct[col]);
            const auto row = diff_reports(report_with(s.model, dataset, SystemKind::court, court),
                                          report_with(s.model, dataset, SystemKind::direct, direct));
            const auto got = row.at(mc);
            c.expect(got && within(*got, s.expected[col], 0.01),
                     std::string("score diff ") + s.model + " col" + std::to_string(col) + " got " +
                         (got ? fmt(*got) : "undef"));
            columns[col].rows.push_back(row);
            if (got) {
                const auto printed = format_percent(got);
                if (printed != format_percent(s.expected[col])) {
                    c.notes.push_back("boundary: " + std::string(s.model) + " col" + std::to_string(col) +
                                      " prints " + printed + " vs " + format_percent(s.expected[col]));
                }
            }
        }
    }
    for (int col = 0; col < 4; ++col) {
        MetricColumn mc = col == 0 || col == 1 ? MetricColumn::score
                          : col == 2           ? MetricColumn::benign_rate
                                               : MetricColumn::jailbreak_rate;
        const auto mean = columns[col].mean().at(mc);
        c.expect(mean && within(*mean, score_diff_mean[col], 0.01), "score diff mean col" + std::to_string(col));
    }

    const double prf_diff[3][3] = {{5.99, -16.44, -0.21}, {-8.02, -25.82, -21.46}, {1.33, -5.83, -5.66}};
    const double prf_diff_mean[3] = {-0.23, -16.03, -9.11};
    DiffTable prf_table;
    for (int m = 0; m < 3; ++m) {
        const auto& direct = kPrfRows[2 * m];
        const auto& court = kPrfRows[2 * m + 1];
        Metrics cm, dm;
        cm.precision = court.precision;
        cm.recall = court.recall;
        cm.f1 = court.f1;
        dm.precision = direct.precision;
        dm.recall = direct.recall;
        dm.f1 = direct.f1;
        const auto row = diff_reports(report_with(direct.model, "Qualifire", SystemKind::court, cm),
                                      report_with(direct.model, "Qualifire", SystemKind::direct, dm));
        prf_table.rows.push_back(row);
        const MetricColumn cols[3] = {MetricColumn::precision, MetricColumn::recall, MetricColumn::f1};
        for (int k = 0; k < 3; ++k) {
            const auto got = row.at(cols[k]);
            c.expect(got && within(*got, prf_diff[m][k], 0.01),
                     std::string("prf diff ") + direct.model + " col" + std::to_string(k) + " got " +
                         (got ? fmt(*got) : "undef"));
            if (got && format_percent(got) != format_percent(prf_diff[m][k])) {
                c.notes.push_back("boundary: " + std::string(direct.model) + " " +
                                  std::string(column_name(cols[k])) + " prints " + format_percent(got) + " vs " +
                                  format_percent(prf_diff[m][k]));
            }
        }
    }
    const auto mean = prf_table.mean();
    c.expect(within(*mean.at(MetricColumn::precision), prf_diff_mean[0], 0.01), "prf diff mean precision");
    c.expect(within(*mean.at(MetricColumn::recall), prf_diff_mean[1], 0.01), "prf diff mean recall");
    c.expect(within(*mean.at(MetricColumn::f1), prf_diff_mean[2], 0.01), "prf diff mean f1");
    return c;
}

Check ac3() {
    Check c;
    std::ifstream in(fixture("llmail_format_cases.jsonl"));
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        const auto got = format_llmail(j["subject"].get<std::string>(), j["body"].get<std::string>());
        c.expect(got == j["expected"].get<std::string>(), "case " + std::to_string(n));
        ++n;
    }
    c.expect(n == 20, "expected 20 cases, found " + std::to_string(n));
    return c;
}

Check ac4() {
    Check c;
    const auto templates = std::make_shared<const TemplateSet>(tagged_templates());

    // Call counts, over the wire against a counting mock.
    {
        MockChatServer server([](const MockRequest& req, int) {
            MockReply r;
            r.content = role_of(req.system) == AgentRole::defense || role_of(req.system) == AgentRole::prosecution
                            ? "an argument"
                            : render_verdict(Classification::benign, ConfidenceLevel::low);
            return r;
        });
        auto backend = std::make_shared<HttpChatBackend>(server.config());
        std::vector<PromptRecord> recs;
        for (int i = 0; i < 1000; ++i) recs.push_back({std::to_string(i), "p" + std::to_string(i), Label::benign, "s", {}});

        const auto direct = evaluate(recs, Detector(SystemKind::direct, backend, templates), {"ac4", 8, false, {}});
        c.expect(server.request_count() == 1000, "direct calls " + std::to_string(server.request_count()));
        c.expect(direct.failed_count == 0, "direct failures");
        server.reset();
        const auto court = evaluate(recs, Detector(SystemKind::court, backend, templates), {"ac4", 8, false, {}});
        c.expect(server.request_count() == 3000, "court calls " + std::to_string(server.request_count()));
        c.expect(court.failed_count == 0, "court failures");
        for (const auto& o : court.outcomes) {
            if (!o.failure_message.empty()) c.notes.push_back("prompt " + o.prompt_id + ": " + o.failure_message);
        }
        c.notes.push_back("calls direct=1000 court=" + std::to_string(server.request_count()));
    }

    // Overlap: attorneys 0.5 s each, judge 0.1 s.
    {
        MockChatServer server([](const MockRequest& req, int) {
            MockReply r;
            const auto role = role_of(req.system);
            if (role == AgentRole::judge) {
                r.delay_s = 0.1;
                r.content = render_verdict(Classification::injection, ConfidenceLevel::high);
            } else {
                r.delay_s = 0.5;
                r.content = "argument";
            }
            return r;
        });
        const HttpChatBackend backend(server.config());
        for (int trial = 0; trial < 3; ++trial) {
            server.reset();
            const auto res = classify_court("overlap test", *templates, backend);
            if (!res.ok()) {
                c.expect(false, "court run failed: " + res.error().message);
                continue;
            }
            double sum = 0;
            for (const auto& t : res->transcripts) sum += t.latency_s;
            const double reduction = 1.0 - res->total_latency_s / sum;
            c.expect(reduction >= 0.40, "trial " + std::to_string(trial) + " reduction " + fmt(reduction));

            const auto iv = server.intervals();
            const MockChatServer::Interval* d = nullptr;
            const MockChatServer::Interval* p = nullptr;
            for (const auto& x : iv) {
                if (x.role == AgentRole::defense) d = &x;
                if (x.role == AgentRole::prosecution) p = &x;
            }
            c.expect(d && p && d->start < p->end && p->start < d->end, "attorney intervals do not overlap");
            if (trial == 0) c.notes.push_back("latency reduction " + fmt(100 * reduction) + "%");
        }
    }
    return c;
}

Check ac5() {
    Check c;
    const auto templates = std::make_shared<const TemplateSet>(tagged_templates());
    constexpr int n = 120;
    std::vector<PromptRecord> recs;
    for (int i = 0; i < n; ++i) {
        recs.push_back({std::to_string(i), "prompt " + std::to_string(i), i % 3 ? Label::injection : Label::benign, "s", {}});
    }
    for (const int k : {0, 1, 2, 28}) {
        // The first k prompts fail: half by backend error, half by unparseable verdict.
        auto backend = std::make_shared<ScriptedBackend>([k](const ChatRequest& req, int) -> Result<Completion, BackendError> {
            const int idx = std::stoi(req.user.substr(req.user.rfind(' ') + 1));
            if (idx < k && idx % 2 == 0) return BackendError{BackendErrorKind::http, 500, "injected", 1};
            if (idx < k) return text("no verdict here");
            return text(render_verdict(idx % 4 ? Classification::injection : Classification::benign,
                                       ConfidenceLevel::moderate));
        });
        const auto rep = evaluate(recs, Detector(SystemKind::direct, backend, templates), {"ac5", 4, false, {}});
        const auto tag = "k=" + std::to_string(k);
        c.expect(rep.failed_count == static_cast<std::uint64_t>(k), tag + " failed_count " + std::to_string(rep.failed_count));
        c.expect(rep.counts.total() == static_cast<std::uint64_t>(n - k), tag + " denominator " + std::to_string(rep.counts.total()));
        if (rep.metrics.accuracy && rep.counts.total() > 0) {
            const double expected = 100.0 * static_cast<double>(rep.counts.tp + rep.counts.tn) / (n - k);
            c.expect(std::fabs(*rep.metrics.accuracy - expected) < 1e-9, tag + " score denominator");
        }
        const auto md = render_report(rep, ReportFormat::markdown);
        const bool has_note = md.find("failed to run and were not included in percentage calculations") != std::string::npos;
        c.expect(has_note == (k > 0), tag + " footnote");
    }
    return c;
}

Check ac6() {
    Check c;
    std::vector<PromptRecord> corpus;
    for (const char* s : {"one", "two", "three"}) {
        for (int i = 0; i < 113; ++i) corpus.push_back({std::string(s) + "-" + std::to_string(i), "t", Label::benign, "notinject", s});
    }
    SampleSpec spec;
    spec.total = 330;
    spec.seed = 42;
    spec.reserve = ReserveSpec{3, 0, "prompt-refinement"};
    const auto a = stratified_sample(corpus, spec);
    const auto b = stratified_sample(corpus, spec);
    c.expect(corpus.size() == 339, "corpus size");
    c.expect(a.sample.size() == 330, "sample size " + std::to_string(a.sample.size()));
    c.expect(a.reserved.size() == 9 && a.remainder.empty(), "reserved/remainder sizes");
    c.expect(write_manifest(a, spec, "notinject") == write_manifest(b, spec, "notinject"), "manifests differ");

    const auto cases = nlohmann::json::parse(read(fixture("largest_remainder_cases.json")));
    c.expect(cases.size() == 50, "expected 50 oracle instances");
    int agree = 0;
    for (const auto& k : cases) {
        const auto sizes = k["sizes"].get<std::vector<std::size_t>>();
        const auto got = largest_remainder(sizes, k["total"].get<std::size_t>());
        if (got == k["expected"].get<std::vector<std::size_t>>()) ++agree;
    }
    c.expect(agree == static_cast<int>(cases.size()), "oracle agreement " + std::to_string(agree));
    c.notes.push_back("oracle instances " + std::to_string(agree) + "/" + std::to_string(cases.size()));
    return c;
}

Check ac7() {
    Check c;
    std::ifstream in(fixture("verdict_corpus.tsv"));
    std::string line;
    int cases = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto t1 = line.find('\t');
        const auto t2 = line.find('\t', t1 + 1);
        const auto cls = line.substr(0, t1);
        const auto conf = line.substr(t1 + 1, t2 - t1 - 1);
        std::string body;
        for (std::size_t i = t2 + 1; i < line.size(); ++i) {
            if (line[i] == '\\' && i + 1 < line.size() && line[i + 1] == 'n') {
                body += '\n';
                ++i;
            } else {
                body += line[i];
            }
        }
        const auto v = parse_verdict(body);
        const bool ok = cls == "FAIL" ? !v.ok()
                                      : v.ok() && to_string(v->classification) == cls &&
                                            to_string(v->confidence) == conf && v->raw == body;
        c.expect(ok, "corpus case " + std::to_string(cases));
        ++cases;
    }
    c.expect(cases == 30, "corpus has " + std::to_string(cases) + " cases");

    const std::string sentence =
        "**Final Verdict:** I am moderately confident that the prompt, on its own, is a prompt injection.";
    const auto v = parse_verdict(sentence);
    c.expect(v.ok() && v->classification == Classification::injection && v->confidence == ConfidenceLevel::moderate,
             "verdict sentence");

    std::mt19937_64 rng(7);
    const char* words[] = {"prompt", "injection", "not", "benign", "the", "is", "a", "guilty", "low", "high", "\n"};
    int round_trips = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::string rationale;
        for (int i = static_cast<int>(rng() % 30); i > 0; --i) rationale += std::string(words[rng() % std::size(words)]) + " ";
        const auto cls = rng() % 2 ? Classification::injection : Classification::benign;
        const auto conf = static_cast<ConfidenceLevel>(rng() % 4);
        const auto raw = rationale + render_verdict(cls, conf);
        const auto parsed = parse_verdict(raw);
        if (parsed.ok() && parsed->classification == cls && parsed->confidence == conf && parsed->raw == raw) ++round_trips;
    }
    c.expect(round_trips == 1000, "round trips " + std::to_string(round_trips));
    c.notes.push_back("corpus " + std::to_string(cases) + ", round trips " + std::to_string(round_trips) + "/1000");
    return c;
}

// Mock script for AC8, keyed on the record number embedded in the prompt.
enum class Scripted { injection, benign, fail };

Scripted script_for(int rec) {
    const auto h = (static_cast<unsigned>(rec) * 2654435761u) >> 7;
    if (h % 9 == 0) return Scripted::fail;
    return h % 2 ? Scripted::injection : Scripted::benign;
}

Check ac8() {
    Check c;
    const auto dir = std::filesystem::temp_directory_path() / "courtguard_acceptance_ac8";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);

    std::vector<Label> truth;
    {
        std::ofstream out(dir / "mixed.jsonl");
        for (int i = 0; i < 40; ++i) {
            const auto label = i % 3 == 0 ? Label::benign : Label::injection;
            truth.push_back(label);
            out << nlohmann::json{{"id", "rec" + std::to_string(i)},
                                  {"text", "synthetic prompt REC-" + std::to_string(i) + "-END"},
                                  {"label", to_string(label)}}
                       .dump()
                << "\n";
        }
    }

    MockChatServer server([](const MockRequest& req, int) {
        MockReply r;
        // Attorney replies never carry a verdict; only the judge prompt quotes them.
        if (req.user.find("ATTORNEY-ARGUMENT") == std::string::npos) {
            r.content = "ATTORNEY-ARGUMENT";
            r.delay_s = 0.002;
            return r;
        }
        const auto at = req.user.find("REC-");
        const int rec = std::stoi(req.user.substr(at + 4));
        switch (script_for(rec)) {
            case Scripted::injection: r.content = render_verdict(Classification::injection, ConfidenceLevel::high); break;
            case Scripted::benign: r.content = render_verdict(Classification::benign, ConfidenceLevel::low); break;
            case Scripted::fail: r.content = "The court is adjourned without a decision."; break;
        }
        return r;
    });

    ConfusionCounts expected;
    std::uint64_t expected_failed = 0;
    for (int i = 0; i < 40; ++i) {
        const auto s = script_for(i);
        if (s == Scripted::fail) {
            ++expected_failed;
            continue;
        }
        expected.add(*to_classification(truth[i]), s == Scripted::injection ? Classification::injection : Classification::benign);
    }

    std::vector<EvalReport> reports;
    for (const int limit : {1, 8}) {
        const auto out_path = (dir / ("report_" + std::to_string(limit) + ".jsonl")).string();
        std::istringstream in;
        std::ostringstream out, err;
        const int code = run_cli({"eval", "--base-url", server.base_url(), "--system", "court", "--corpus",
                                  (dir / "mixed.jsonl").string(), "--schema", "mixed", "--concurrency",
                                  std::to_string(limit), "--out", out_path},
                                 in, out, err);
        c.expect(code == kExitOk, "eval exit " + std::to_string(code) + ": " + err.str());
        if (code != kExitOk) return c;
        reports.push_back(parse_report_jsonl(read(out_path)));
        const auto& rep = reports.back();
        const auto tag = "concurrency " + std::to_string(limit);
        c.expect(rep.counts == expected, tag + " counts differ from brute force");
        c.expect(rep.failed_count == expected_failed, tag + " failed_count");
        c.expect(rep.outcomes.size() == 40, tag + " outcome lines");
    }
    if (reports.size() == 2) {
        bool same = true;
        for (std::size_t i = 0; i < 40; ++i) {
            same = same && reports[0].outcomes[i].prompt_id == reports[1].outcomes[i].prompt_id &&
                   reports[0].outcomes[i].predicted == reports[1].outcomes[i].predicted &&
                   reports[0].outcomes[i].status == reports[1].outcomes[i].status;
        }
        c.expect(same, "outcomes differ between concurrency 1 and 8");
        c.notes.push_back("tp=" + std::to_string(expected.tp) + " fp=" + std::to_string(expected.fp) +
                          " tn=" + std::to_string(expected.tn) + " fn=" + std::to_string(expected.fn) +
                          " failed=" + std::to_string(expected_failed));
    }
    return c;
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Check()>> criteria[] = {
        {"AC1 metric arithmetic (F1 from precision/recall)", ac1},
        {"AC2 diff arithmetic (court minus direct tables)", ac2},
        {"AC3 llmail prompt formatting", ac3},
        {"AC4 pipeline shape (call counts, attorney overlap)", ac4},
        {"AC5 failure exclusion", ac5},
        {"AC6 sampling determinism", ac6},
        {"AC7 verdict parser suite", ac7},
        {"AC8 end-to-end eval smoke", ac8},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Check result;
        try {
            result = fn();
        } catch (const std::exception& e) {
            result.ok = false;
            result.notes.push_back(std::string("exception: ") + e.what());
        }
        std::printf("%s %s", result.ok ? "PASS" : "FAIL", name);
        if (!result.notes.empty()) {
            std::printf(" [");
            for (std::size_t i = 0; i < result.notes.size(); ++i) std::printf("%s%s", i ? "; " : "", result.notes[i].c_str());
            std::printf("]");
        }
        std::printf("\n");
        std::fflush(stdout);
        if (!result.ok) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
