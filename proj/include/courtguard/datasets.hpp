#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "courtguard/types.hpp"

namespace courtguard {

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// llmail: subject/body/phase rows, all injections.
/// notinject: text/split rows, all benign.
/// mixed: text/label rows.
enum class CorpusSchema { llmail, notinject, mixed };

std::string_view to_string(CorpusSchema s);
std::optional<CorpusSchema> parse_schema(std::string_view s);

struct CorpusSpec {
    std::string name;
    std::filesystem::path path;
    CorpusSchema schema = CorpusSchema::mixed;
    std::optional<Classification> default_label;  // mixed rows without a label
};

/// "subject: " + subject + "; body: " + body, byte for byte.
std::string format_llmail(std::string_view subject, std::string_view body);

/// Loads JSON Lines, or CSV with a header row when the path ends in .csv.
std::vector<PromptRecord> load_corpus(const CorpusSpec& spec);

/// Same rules as load_corpus over in-memory JSON Lines text.
std::vector<PromptRecord> parse_corpus_jsonl(std::string_view text, const CorpusSpec& spec);

/// CSV adapter: each row becomes a JSON object keyed by the header row
/// (RFC 4180 quoting) and then goes through the JSONL rules.
std::vector<PromptRecord> parse_corpus_csv(std::string_view text, const CorpusSpec& spec);

/// SplitMix64. The sampler's only source of randomness; its output sequence
/// is fixed by the algorithm, so manifests are identical across platforms.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, bound) by rejection: draws below 2^64 mod bound are
    /// discarded, the rest are reduced mod bound.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t x = next();
            if (x >= threshold) return x % bound;
        }
    }

private:
    std::uint64_t state_;
};

/// Fisher-Yates, walking i from n-1 down to 1 and swapping with below(i+1).
template <typename T>
void seeded_shuffle(std::vector<T>& items, SplitMix64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(items[i - 1], items[j]);
    }
}

/// Hamilton apportionment: floor of each exact quota, then one extra unit to
/// the largest remainders (ties go to the earlier index). Sums to `total`.
std::vector<std::size_t> largest_remainder(std::span<const std::size_t> sizes, std::size_t total);

/// Records set aside before sampling (e.g. for prompt tuning). Exactly one of
/// per_stratum / total is nonzero.
struct ReserveSpec {
    std::size_t per_stratum = 0;
    std::size_t total = 0;  // apportioned across strata like the main sample
    std::string purpose = "prompt-refinement";
};

struct SampleSpec {
    std::size_t total = 0;
    /// "stratum", "source", "label", or "" for a single stratum.
    std::string stratum_key = "stratum";
    std::uint64_t seed = 0;
    std::optional<ReserveSpec> reserve;

    static SampleSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

enum class Partition { sample, reserved, remainder };

std::string_view to_string(Partition p);
std::optional<Partition> parse_partition(std::string_view s);

struct StratumAllocation {
    std::string stratum;
    std::size_t size = 0;
    std::size_t reserved = 0;
    std::size_t sampled = 0;
};

struct SampleResult {
    std::vector<PromptRecord> sample;
    std::vector<PromptRecord> reserved;
    std::vector<PromptRecord> remainder;
    std::vector<StratumAllocation> strata;  // sorted by stratum value
};

/// Groups by stratum (sorted byte-wise), shuffles each group with one
/// SplitMix64 stream in that order, takes the reservation off the front of
/// each group, then apportions `total` over what is left. Throws
/// DatasetError when a record lacks the stratum field or a quota exceeds a
/// stratum's size.
SampleResult stratified_sample(std::span<const PromptRecord> records, const SampleSpec& spec);

/// JSON Lines manifest: a header object (seed, spec, PRNG name, counts)
/// followed by one {id, source, stratum, partition} line per record.
std::string write_manifest(const SampleResult& result, const SampleSpec& spec,
                           std::string_view corpus_name);

struct ManifestEntry {
    std::string id;
    std::string source;
    std::optional<std::string> stratum;
    Partition partition = Partition::sample;
};

struct Manifest {
    nlohmann::json header;
    std::vector<ManifestEntry> entries;
};

Manifest parse_manifest(std::string_view text);

/// Records of `corpus` listed under `partition`, in manifest order.
std::vector<PromptRecord> select_partition(std::span<const PromptRecord> corpus,
                                           const Manifest& manifest, Partition partition);

}  // namespace courtguard
