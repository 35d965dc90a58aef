#include "courtguard/datasets.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace courtguard {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open corpus: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

[[noreturn]] void schema_error(const CorpusSpec& spec, std::size_t line, const std::string& id,
                               const std::string& field, const std::string& what) {
    std::string msg = spec.name + " record " + std::to_string(line);
    if (!id.empty()) msg += " (id " + id + ")";
    msg += ", field '" + field + "': " + what;
    throw DatasetError(msg);
}

// Strings pass through; numbers and booleans become their JSON spelling.
std::optional<std::string> scalar_string(const nlohmann::json& row, const char* key) {
    const auto it = row.find(key);
    if (it == row.end() || it->is_null()) return std::nullopt;
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number() || it->is_boolean()) return it->dump();
    return std::nullopt;
}

std::optional<std::string> first_of(const nlohmann::json& row, std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
        if (auto v = scalar_string(row, k)) return v;
    }
    return std::nullopt;
}

std::optional<Label> label_of(const nlohmann::json& value) {
    if (value.is_boolean()) return value.get<bool>() ? Label::injection : Label::benign;
    if (value.is_number_integer()) {
        const auto v = value.get<long long>();
        if (v == 1) return Label::injection;
        if (v == 0) return Label::benign;
        return std::nullopt;
    }
    if (value.is_string()) {
        auto s = value.get<std::string>();
        std::transform(s.begin(), s.end(), s.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        const auto l = parse_label(s);
        if (l && *l != Label::unknown) return l;
    }
    return std::nullopt;
}

PromptRecord row_to_record(const nlohmann::json& row, std::size_t line, const CorpusSpec& spec) {
    if (!row.is_object()) schema_error(spec, line, "", "<row>", "not a JSON object");
    PromptRecord rec;
    rec.source = spec.name;
    rec.id = scalar_string(row, "id").value_or(std::to_string(line));

    const auto require_string = [&](const char* field) {
        const auto it = row.find(field);
        if (it == row.end()) schema_error(spec, line, rec.id, field, "missing");
        if (!it->is_string()) schema_error(spec, line, rec.id, field, "not a string");
        return it->get<std::string>();
    };

    switch (spec.schema) {
        case CorpusSchema::llmail: {
            const auto subject = require_string("subject");
            const auto body = require_string("body");
            rec.text = format_llmail(subject, body);
            rec.label = Label::injection;
            rec.stratum = first_of(row, {"phase", "stratum"});
            break;
        }
        case CorpusSchema::notinject:
            rec.text = require_string("text");
            rec.label = Label::benign;
            rec.stratum = first_of(row, {"split", "stratum"});
            break;
        case CorpusSchema::mixed: {
            rec.text = require_string("text");
            const auto it = row.find("label");
            if (it == row.end() || it->is_null()) {
                if (!spec.default_label) schema_error(spec, line, rec.id, "label", "missing");
                rec.label = to_label(*spec.default_label);
            } else {
                const auto l = label_of(*it);
                if (!l) schema_error(spec, line, rec.id, "label", "unrecognized value " + it->dump());
                rec.label = *l;
            }
            rec.stratum = scalar_string(row, "stratum");
            break;
        }
    }
    if (!has_content(rec.text)) schema_error(spec, line, rec.id, "text", "empty after trimming");
    return rec;
}

std::vector<PromptRecord> rows_to_records(const std::vector<std::pair<std::size_t, nlohmann::json>>& rows,
                                          const CorpusSpec& spec) {
    std::vector<PromptRecord> out;
    out.reserve(rows.size());
    std::set<std::string> seen;
    for (const auto& [line, row] : rows) {
        auto rec = row_to_record(row, line, spec);
        if (!seen.insert(rec.id).second) {
            schema_error(spec, line, rec.id, "id", "duplicate id in source " + spec.name);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<std::vector<std::string>> parse_csv_rows(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        any = true;
        if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else {
            field.push_back(c);
        }
    }
    if (quoted) throw DatasetError("unterminated quoted CSV field");
    if (any || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string stratum_value(const PromptRecord& r, const std::string& key, std::size_t index) {
    if (key.empty()) return {};
    if (key == "stratum") {
        if (!r.stratum) {
            throw DatasetError("record " + std::to_string(index) + " (id " + r.id +
                               ") has no stratum value");
        }
        return *r.stratum;
    }
    if (key == "source") return r.source;
    if (key == "label") return std::string(to_string(r.label));
    throw DatasetError("unsupported stratum key: " + key);
}

}  // namespace

std::string_view to_string(CorpusSchema s) {
    switch (s) {
        case CorpusSchema::llmail: return "llmail";
        case CorpusSchema::notinject: return "notinject";
        case CorpusSchema::mixed: return "mixed";
    }
    return "mixed";
}

std::optional<CorpusSchema> parse_schema(std::string_view s) {
    if (s == "llmail") return CorpusSchema::llmail;
    if (s == "notinject") return CorpusSchema::notinject;
    if (s == "mixed") return CorpusSchema::mixed;
    return std::nullopt;
}

std::string format_llmail(std::string_view subject, std::string_view body) {
    std::string out;
    out.reserve(subject.size() + body.size() + 17);
    out.append("subject: ").append(subject).append("; body: ").append(body);
    return out;
}

std::vector<PromptRecord> parse_corpus_jsonl(std::string_view text, const CorpusSpec& spec) {
    std::vector<std::pair<std::size_t, nlohmann::json>> rows;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!has_content(line)) continue;
        auto row = nlohmann::json::parse(line, nullptr, false);
        if (row.is_discarded()) schema_error(spec, line_no, "", "<row>", "invalid JSON");
        rows.emplace_back(line_no, std::move(row));
    }
    return rows_to_records(rows, spec);
}

std::vector<PromptRecord> parse_corpus_csv(std::string_view text, const CorpusSpec& spec) {
    auto table = parse_csv_rows(text);
    if (table.empty()) return {};
    const auto header = table.front();
    std::vector<std::pair<std::size_t, nlohmann::json>> rows;
    for (std::size_t r = 1; r < table.size(); ++r) {
        const auto& cells = table[r];
        if (cells.size() == 1 && cells[0].empty()) continue;
        if (cells.size() != header.size()) {
            schema_error(spec, r, "", "<row>",
                         "expected " + std::to_string(header.size()) + " columns, got " +
                             std::to_string(cells.size()));
        }
        nlohmann::json row = nlohmann::json::object();
        for (std::size_t c = 0; c < header.size(); ++c) row[header[c]] = cells[c];
        rows.emplace_back(r, std::move(row));
    }
    return rows_to_records(rows, spec);
}

std::vector<PromptRecord> load_corpus(const CorpusSpec& spec) {
    const auto text = read_file(spec.path);
    if (spec.path.extension() == ".csv") return parse_corpus_csv(text, spec);
    return parse_corpus_jsonl(text, spec);
}

std::vector<std::size_t> largest_remainder(std::span<const std::size_t> sizes, std::size_t total) {
    const std::size_t population = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    std::vector<std::size_t> alloc(sizes.size(), 0);
    if (population == 0) {
        if (total != 0) throw DatasetError("cannot allocate from an empty population");
        return alloc;
    }
    std::vector<std::uint64_t> rem(sizes.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const auto product = static_cast<unsigned __int128>(total) * sizes[i];
        alloc[i] = static_cast<std::size_t>(product / population);
        rem[i] = static_cast<std::uint64_t>(product % population);
        assigned += alloc[i];
    }
    std::vector<std::size_t> order(sizes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; assigned < total; ++k) {
        ++alloc[order[k]];
        ++assigned;
    }
    return alloc;
}

SampleSpec SampleSpec::from_json(const nlohmann::json& j) {
    SampleSpec spec;
    spec.total = j.at("total").get<std::size_t>();
    spec.stratum_key = j.value("stratum_key", std::string("stratum"));
    spec.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("reserve") && !j["reserve"].is_null()) {
        const auto& r = j["reserve"];
        ReserveSpec res;
        res.per_stratum = r.value("per_stratum", std::size_t{0});
        res.total = r.value("total", std::size_t{0});
        res.purpose = r.value("purpose", res.purpose);
        if ((res.per_stratum == 0) == (res.total == 0)) {
            throw DatasetError("reserve needs exactly one of per_stratum or total");
        }
        spec.reserve = res;
    }
    return spec;
}

nlohmann::json SampleSpec::to_json() const {
    nlohmann::json j{{"total", total}, {"stratum_key", stratum_key}, {"seed", seed}};
    if (reserve) {
        j["reserve"] = {{"per_stratum", reserve->per_stratum},
                        {"total", reserve->total},
                        {"purpose", reserve->purpose}};
    } else {
        j["reserve"] = nullptr;
    }
    return j;
}

std::string_view to_string(Partition p) {
    switch (p) {
        case Partition::sample: return "sample";
        case Partition::reserved: return "reserved";
        case Partition::remainder: return "remainder";
    }
    return "sample";
}

std::optional<Partition> parse_partition(std::string_view s) {
    if (s == "sample") return Partition::sample;
    if (s == "reserved") return Partition::reserved;
    if (s == "remainder") return Partition::remainder;
    return std::nullopt;
}

SampleResult stratified_sample(std::span<const PromptRecord> records, const SampleSpec& spec) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < records.size(); ++i) {
        groups[stratum_value(records[i], spec.stratum_key, i)].push_back(i);
    }

    SplitMix64 rng(spec.seed);
    std::vector<std::vector<std::size_t>> shuffled;
    std::vector<StratumAllocation> strata;
    std::vector<std::size_t> sizes;
    for (auto& [key, members] : groups) {
        seeded_shuffle(members, rng);
        strata.push_back({key, members.size(), 0, 0});
        sizes.push_back(members.size());
        shuffled.push_back(members);
    }

    if (spec.reserve) {
        std::vector<std::size_t> quota;
        if (spec.reserve->per_stratum > 0) {
            quota.assign(sizes.size(), spec.reserve->per_stratum);
        } else {
            const auto pool = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
            if (spec.reserve->total > pool) {
                throw DatasetError("reservation of " + std::to_string(spec.reserve->total) +
                                   " exceeds corpus size " + std::to_string(pool));
            }
            quota = largest_remainder(sizes, spec.reserve->total);
        }
        for (std::size_t s = 0; s < strata.size(); ++s) {
            if (quota[s] > sizes[s]) {
                throw DatasetError("reservation of " + std::to_string(quota[s]) + " exceeds stratum '" +
                                   strata[s].stratum + "' of size " + std::to_string(sizes[s]));
            }
            strata[s].reserved = quota[s];
        }
    }

    std::vector<std::size_t> available(strata.size());
    for (std::size_t s = 0; s < strata.size(); ++s) available[s] = sizes[s] - strata[s].reserved;
    const auto pool = std::accumulate(available.begin(), available.end(), std::size_t{0});
    if (spec.total > pool) {
        throw DatasetError("sample total " + std::to_string(spec.total) + " exceeds the " +
                           std::to_string(pool) + " records available after reservation");
    }
    const auto alloc = largest_remainder(available, spec.total);

    SampleResult out;
    for (std::size_t s = 0; s < strata.size(); ++s) {
        strata[s].sampled = alloc[s];
        const auto& members = shuffled[s];
        const std::size_t reserved_end = strata[s].reserved;
        const std::size_t sample_end = reserved_end + alloc[s];
        for (std::size_t k = 0; k < members.size(); ++k) {
            const auto& rec = records[members[k]];
            if (k < reserved_end) {
                out.reserved.push_back(rec);
            } else if (k < sample_end) {
                out.sample.push_back(rec);
            } else {
                out.remainder.push_back(rec);
            }
        }
    }
    out.strata = std::move(strata);
    return out;
}

std::string write_manifest(const SampleResult& result, const SampleSpec& spec,
                           std::string_view corpus_name) {
    nlohmann::json strata = nlohmann::json::array();
    for (const auto& s : result.strata) {
        strata.push_back(
            {{"stratum", s.stratum}, {"size", s.size}, {"reserved", s.reserved}, {"sampled", s.sampled}});
    }
    nlohmann::json header{
        {"kind", "courtguard.sample_manifest"},
        {"version", 1},
        {"corpus", corpus_name},
        {"prng", "splitmix64"},
        {"shuffle", "fisher-yates, i from n-1 down to 1, j = below(i+1), strata in byte order"},
        {"spec", spec.to_json()},
        {"strata", std::move(strata)},
        {"counts",
         {{"sample", result.sample.size()},
          {"reserved", result.reserved.size()},
          {"remainder", result.remainder.size()}}},
    };
    std::string out = header.dump();
    out.push_back('\n');
    const auto emit = [&](const std::vector<PromptRecord>& part, Partition p) {
        for (const auto& r : part) {
            nlohmann::json line{{"id", r.id}, {"source", r.source}, {"partition", to_string(p)}};
            line["stratum"] = r.stratum ? nlohmann::json(*r.stratum) : nlohmann::json(nullptr);
            out += line.dump();
            out.push_back('\n');
        }
    };
    emit(result.sample, Partition::sample);
    emit(result.reserved, Partition::reserved);
    emit(result.remainder, Partition::remainder);
    return out;
}

Manifest parse_manifest(std::string_view text) {
    Manifest m;
    std::istringstream in{std::string(text)};
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!has_content(line)) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw DatasetError("invalid manifest line: " + line);
        if (first) {
            if (j.value("kind", "") != "courtguard.sample_manifest") {
                throw DatasetError("not a sample manifest (missing header)");
            }
            m.header = std::move(j);
            first = false;
            continue;
        }
        ManifestEntry e;
        e.id = j.at("id").get<std::string>();
        e.source = j.value("source", "");
        if (j.contains("stratum") && j["stratum"].is_string()) e.stratum = j["stratum"].get<std::string>();
        const auto p = parse_partition(j.value("partition", ""));
        if (!p) throw DatasetError("manifest entry " + e.id + " has an unknown partition");
        e.partition = *p;
        m.entries.push_back(std::move(e));
    }
    if (first) throw DatasetError("empty manifest");
    return m;
}

std::vector<PromptRecord> select_partition(std::span<const PromptRecord> corpus,
                                           const Manifest& manifest, Partition partition) {
    std::map<std::pair<std::string, std::string>, const PromptRecord*> index;
    for (const auto& r : corpus) index[{r.source, r.id}] = &r;
    std::vector<PromptRecord> out;
    for (const auto& e : manifest.entries) {
        if (e.partition != partition) continue;
        const auto it = index.find({e.source, e.id});
        if (it == index.end()) {
            throw DatasetError("manifest lists " + e.source + "/" + e.id + " but the corpus lacks it");
        }
        out.push_back(*it->second);
    }
    return out;
}

}  // namespace courtguard
