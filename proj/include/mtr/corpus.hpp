#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace mtr {

/// One entry of the tool database: a tool is its name plus a descriptive
/// document. token_count is the approximate token length of the description.
struct ToolRecord {
    std::string id;
    std::string name;
    std::string description;
    size_t token_count = 0;
};

/// Immutable after load; safe for concurrent reads.
class ToolCorpus {
public:
    ToolCorpus() = default;
    explicit ToolCorpus(std::vector<ToolRecord> tools);

    size_t size() const { return tools_.size(); }
    const std::vector<ToolRecord>& tools() const { return tools_; }
    const ToolRecord& at(size_t ordinal) const { return tools_.at(ordinal); }

    bool contains(const std::string& id) const { return index_.count(id) > 0; }
    /// Ordinal position of a tool id, or nullopt if absent.
    std::optional<size_t> ordinal_of(const std::string& id) const;
    const ToolRecord& by_id(const std::string& id) const;

    /// FNV-1a digest over all records, for provenance stamping.
    uint64_t digest() const;

private:
    std::vector<ToolRecord> tools_;
    std::unordered_map<std::string, size_t> index_;
};

/// One annotated query with its golden tool set. Golden ids are stored as a
/// sorted set: duplicates in input collapse (sufficiency is set containment).
struct QuerySample {
    std::string query_id;
    std::string query;
    std::set<std::string> golden_tools;
};

struct SampleSet {
    std::vector<QuerySample> train;
    std::vector<QuerySample> test;
};

struct ValidationReport {
    struct ToolStat {
        std::string id;
        size_t tokens = 0;
    };
    std::vector<ToolStat> per_tool;
    size_t min_tokens = 0;
    double median_tokens = 0.0;
    size_t max_tokens = 0;
    std::vector<std::string> warnings; // out-of-range ids; advisory only
};

/// Parameters for the synthetic corpus generator, the desk-scale stand-in
/// for the real benchmark data. Every tool description carries a keyword
/// unique to that tool; queries mention their golden tools' keywords, each
/// independently dropped with probability keyword_dropout.
struct SynthSpec {
    size_t tool_count = 200;
    std::set<size_t> golden_per_sample = {1, 2, 3};
    size_t sample_count = 100;
    size_t vocabulary_size = 1000;
    double keyword_dropout = 0.0;
    uint64_t seed = 0;
};

ToolCorpus load_tools(const std::string& path);
ToolCorpus parse_tools(const std::string& content, const std::string& origin);

SampleSet load_samples(const std::string& path, const ToolCorpus& corpus,
                       std::vector<std::string>* warnings = nullptr);
SampleSet parse_samples(const std::string& content, const std::string& origin,
                        const ToolCorpus& corpus,
                        std::vector<std::string>* warnings = nullptr);

std::string serialize_tools(const ToolCorpus& corpus);
std::string serialize_samples(const SampleSet& samples);

ValidationReport validate_corpus(const ToolCorpus& corpus,
                                 std::optional<std::pair<size_t, size_t>> expected_range = std::nullopt);

std::pair<ToolCorpus, SampleSet> synth_generate(const SynthSpec& spec);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

} // namespace mtr
