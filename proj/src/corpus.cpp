#include "mtr/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mtr/errors.hpp"
#include "mtr/rng.hpp"
#include "mtr/text.hpp"

namespace mtr {

using nlohmann::json;

ToolCorpus::ToolCorpus(std::vector<ToolRecord> tools) : tools_(std::move(tools)) {
    index_.reserve(tools_.size());
    for (size_t i = 0; i < tools_.size(); ++i) {
        auto [it, inserted] = index_.emplace(tools_[i].id, i);
        if (!inserted) throw Error("duplicate tool id in corpus: " + tools_[i].id);
    }
}

std::optional<size_t> ToolCorpus::ordinal_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const ToolRecord& ToolCorpus::by_id(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error("unknown tool id: " + id);
    return tools_[it->second];
}

uint64_t ToolCorpus::digest() const {
    uint64_t h = fnv1a64("tool-corpus");
    for (const auto& t : tools_) {
        h ^= fnv1a64(t.id);
        h *= 1099511628211ULL;
        h ^= fnv1a64(t.name);
        h *= 1099511628211ULL;
        h ^= fnv1a64(t.description);
        h *= 1099511628211ULL;
    }
    return h;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << content;
    if (!out) throw Error("write failed: " + path);
}

namespace {

// Iterate non-blank lines, reporting 1-based line numbers.
template <typename Fn>
void for_each_line(const std::string& content, Fn&& fn) {
    size_t line_no = 0;
    size_t pos = 0;
    while (pos <= content.size()) {
        size_t eol = content.find('\n', pos);
        size_t len = (eol == std::string::npos ? content.size() : eol) - pos;
        ++line_no;
        std::string_view line(content.data() + pos, len);
        if (!trim(line).empty()) fn(line_no, line);
        if (eol == std::string::npos) break;
        pos = eol + 1;
    }
}

json parse_line(std::string_view line, const std::string& origin, size_t line_no) {
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::parse_error& e) {
        throw Error(origin + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    if (!obj.is_object()) {
        throw Error(origin + ":" + std::to_string(line_no) + ": expected a JSON object");
    }
    return obj;
}

std::string require_string(const json& obj, const char* key, const std::string& origin,
                           size_t line_no) {
    if (!obj.contains(key) || !obj[key].is_string()) {
        throw Error(origin + ":" + std::to_string(line_no) + ": missing string field \"" +
                    key + "\"");
    }
    return obj[key].get<std::string>();
}

} // namespace

ToolCorpus parse_tools(const std::string& content, const std::string& origin) {
    std::vector<ToolRecord> tools;
    std::unordered_map<std::string, size_t> first_line_of_id;

    for_each_line(content, [&](size_t line_no, std::string_view line) {
        json obj = parse_line(line, origin, line_no);
        ToolRecord rec;
        rec.id = require_string(obj, "id", origin, line_no);
        rec.name = require_string(obj, "name", origin, line_no);
        rec.description = require_string(obj, "description", origin, line_no);
        if (rec.id.empty()) {
            throw Error(origin + ":" + std::to_string(line_no) + ": empty tool id");
        }
        if (rec.name.empty()) {
            throw Error(origin + ":" + std::to_string(line_no) + ": empty tool name");
        }
        if (trim(rec.description).empty()) {
            throw Error(origin + ":" + std::to_string(line_no) + ": empty description for tool " +
                        rec.id);
        }
        auto [it, inserted] = first_line_of_id.emplace(rec.id, line_no);
        if (!inserted) {
            throw Error(origin + ": duplicate id \"" + rec.id + "\" on lines " +
                        std::to_string(it->second) + " and " + std::to_string(line_no));
        }
        rec.token_count = token_count(rec.description);
        tools.push_back(std::move(rec));
    });

    if (tools.empty()) throw Error(origin + ": empty corpus");
    return ToolCorpus(std::move(tools));
}

ToolCorpus load_tools(const std::string& path) {
    return parse_tools(read_file(path), path);
}

SampleSet parse_samples(const std::string& content, const std::string& origin,
                        const ToolCorpus& corpus, std::vector<std::string>* warnings) {
    SampleSet out;
    std::unordered_map<std::string, size_t> seen_query_ids;

    for_each_line(content, [&](size_t line_no, std::string_view line) {
        json obj = parse_line(line, origin, line_no);
        QuerySample sample;
        sample.query_id = require_string(obj, "query_id", origin, line_no);
        sample.query = require_string(obj, "query", origin, line_no);
        if (sample.query_id.empty()) {
            throw Error(origin + ":" + std::to_string(line_no) + ": empty query_id");
        }
        if (trim(sample.query).empty()) {
            throw Error(origin + ":" + std::to_string(line_no) + ": empty query for " +
                        sample.query_id);
        }
        auto [it, inserted] = seen_query_ids.emplace(sample.query_id, line_no);
        if (!inserted) {
            throw Error(origin + ": duplicate query_id \"" + sample.query_id + "\" on lines " +
                        std::to_string(it->second) + " and " + std::to_string(line_no));
        }

        if (!obj.contains("golden_tools") || !obj["golden_tools"].is_array() ||
            obj["golden_tools"].empty()) {
            throw Error(origin + ":" + std::to_string(line_no) +
                        ": golden_tools must be a non-empty array (" + sample.query_id + ")");
        }
        size_t listed = 0;
        for (const auto& g : obj["golden_tools"]) {
            if (!g.is_string()) {
                throw Error(origin + ":" + std::to_string(line_no) +
                            ": golden_tools entries must be strings");
            }
            std::string id = g.get<std::string>();
            if (!corpus.contains(id)) {
                throw Error(origin + ":" + std::to_string(line_no) + ": unknown golden tool \"" +
                            id + "\" in sample " + sample.query_id);
            }
            ++listed;
            sample.golden_tools.insert(std::move(id));
        }
        if (sample.golden_tools.size() < listed && warnings) {
            warnings->push_back(origin + ":" + std::to_string(line_no) +
                                ": duplicate golden tools collapsed in sample " + sample.query_id);
        }

        std::string split = require_string(obj, "split", origin, line_no);
        if (split == "train") {
            out.train.push_back(std::move(sample));
        } else if (split == "test") {
            out.test.push_back(std::move(sample));
        } else {
            throw Error(origin + ":" + std::to_string(line_no) + ": split must be train or test, got \"" +
                        split + "\"");
        }
    });

    return out;
}

SampleSet load_samples(const std::string& path, const ToolCorpus& corpus,
                       std::vector<std::string>* warnings) {
    return parse_samples(read_file(path), path, corpus, warnings);
}

std::string serialize_tools(const ToolCorpus& corpus) {
    std::string out;
    for (const auto& t : corpus.tools()) {
        json obj{{"id", t.id}, {"name", t.name}, {"description", t.description}};
        out += obj.dump();
        out += '\n';
    }
    return out;
}

std::string serialize_samples(const SampleSet& samples) {
    std::string out;
    auto dump = [&](const QuerySample& s, const char* split) {
        json obj{{"query_id", s.query_id},
                 {"query", s.query},
                 {"golden_tools", std::vector<std::string>(s.golden_tools.begin(), s.golden_tools.end())},
                 {"split", split}};
        out += obj.dump();
        out += '\n';
    };
    for (const auto& s : samples.train) dump(s, "train");
    for (const auto& s : samples.test) dump(s, "test");
    return out;
}

ValidationReport validate_corpus(const ToolCorpus& corpus,
                                 std::optional<std::pair<size_t, size_t>> expected_range) {
    ValidationReport report;
    report.per_tool.reserve(corpus.size());
    std::vector<size_t> counts;
    counts.reserve(corpus.size());
    for (const auto& t : corpus.tools()) {
        report.per_tool.push_back({t.id, t.token_count});
        counts.push_back(t.token_count);
        if (expected_range &&
            (t.token_count < expected_range->first || t.token_count > expected_range->second)) {
            report.warnings.push_back("tool " + t.id + ": " + std::to_string(t.token_count) +
                                      " tokens outside expected range [" +
                                      std::to_string(expected_range->first) + ", " +
                                      std::to_string(expected_range->second) + "]");
        }
    }
    if (!counts.empty()) {
        std::sort(counts.begin(), counts.end());
        report.min_tokens = counts.front();
        report.max_tokens = counts.back();
        size_t mid = counts.size() / 2;
        report.median_tokens = counts.size() % 2 == 1
                                   ? static_cast<double>(counts[mid])
                                   : (static_cast<double>(counts[mid - 1]) + counts[mid]) / 2.0;
    }
    return report;
}

namespace {

std::string zero_pad(size_t value, size_t width) {
    std::string s = std::to_string(value);
    if (s.size() < width) s.insert(0, width - s.size(), '0');
    return s;
}

size_t digits_for(size_t n) {
    size_t width = 1;
    while (n >= 10) {
        n /= 10;
        ++width;
    }
    return width;
}

// Scaffold vocabularies for synthetic text. The two sets share no word with
// each other or with generated vocabulary words, so query/document term
// overlap happens only through keywords. That makes retrieval outcomes a
// pure function of which keywords survive dropout.
const std::vector<std::string> kDescOpeners = {
    "service that handles", "utility that manages", "endpoint that supports",
    "interface that processes", "component that resolves"};
const std::vector<std::string> kDescConnectors = {"requests across", "records within",
                                                  "operations over", "batches through"};
const std::vector<std::string> kDescTails = {"resources", "streams", "channels", "workloads"};
const std::vector<std::string> kQueryOpeners = {"i need to", "please help me", "how can i",
                                                "looking for a way to", "assist me to"};
const std::vector<std::string> kQueryVerbs = {"use", "invoke", "call", "apply", "run"};
const std::vector<std::string> kQueryTails = {"right away", "for this task", "when possible",
                                              "in the current workflow", "as a next step"};

} // namespace

std::pair<ToolCorpus, SampleSet> synth_generate(const SynthSpec& spec) {
    if (spec.tool_count == 0) throw Error("synth: tool_count must be positive");
    if (spec.sample_count == 0) throw Error("synth: sample_count must be positive");
    if (spec.vocabulary_size < spec.tool_count) {
        throw Error("synth: vocabulary smaller than tool_count (" +
                    std::to_string(spec.vocabulary_size) + " < " +
                    std::to_string(spec.tool_count) + ")");
    }
    if (spec.keyword_dropout < 0.0 || spec.keyword_dropout > 1.0) {
        throw Error("synth: keyword_dropout must lie in [0, 1]");
    }
    if (spec.golden_per_sample.empty()) throw Error("synth: golden_per_sample must be non-empty");
    for (size_t g : spec.golden_per_sample) {
        if (g == 0 || g > spec.tool_count) {
            throw Error("synth: golden set size " + std::to_string(g) +
                        " infeasible for tool_count " + std::to_string(spec.tool_count));
        }
    }

    size_t vocab_width = digits_for(spec.vocabulary_size - 1);
    auto vocab_word = [&](size_t j) { return "term" + zero_pad(j, vocab_width); };
    size_t tool_width = digits_for(spec.tool_count - 1);
    size_t filler_pool = spec.vocabulary_size - spec.tool_count;

    // Tool i owns vocabulary word i as its discriminative keyword; filler
    // words come from the remainder, so a keyword occurs in exactly one
    // description.
    Rng tool_rng(derive_seed(spec.seed, 1));
    std::vector<ToolRecord> tools;
    tools.reserve(spec.tool_count);
    for (size_t i = 0; i < spec.tool_count; ++i) {
        std::string kw = vocab_word(i);
        ToolRecord rec;
        rec.id = "t" + zero_pad(i, tool_width);
        rec.name = "svc" + zero_pad(i, tool_width) + " " + kw;
        std::string desc = kDescOpeners[tool_rng.next_below(kDescOpeners.size())];
        desc += " " + kw + " ";
        desc += kDescConnectors[tool_rng.next_below(kDescConnectors.size())];
        size_t fillers = 4 + tool_rng.next_below(5);
        for (size_t f = 0; f < fillers && filler_pool > 0; ++f) {
            desc += " " + vocab_word(spec.tool_count + tool_rng.next_below(filler_pool));
        }
        desc += " " + kDescTails[tool_rng.next_below(kDescTails.size())];
        rec.description = std::move(desc);
        rec.token_count = token_count(rec.description);
        tools.push_back(std::move(rec));
    }
    ToolCorpus corpus(std::move(tools));

    std::vector<size_t> golden_sizes(spec.golden_per_sample.begin(), spec.golden_per_sample.end());
    size_t sample_width = digits_for(spec.sample_count - 1);
    size_t train_count = std::max<size_t>(1, spec.sample_count / 10);

    Rng sample_rng(derive_seed(spec.seed, 2));
    SampleSet samples;
    for (size_t i = 0; i < spec.sample_count; ++i) {
        QuerySample s;
        s.query_id = "q" + zero_pad(i, sample_width);
        size_t g = golden_sizes[sample_rng.next_below(golden_sizes.size())];
        std::vector<size_t> picks = sample_rng.sample_indices(spec.tool_count, g);
        std::string text = kQueryOpeners[sample_rng.next_below(kQueryOpeners.size())];
        text += " " + kQueryVerbs[sample_rng.next_below(kQueryVerbs.size())];
        for (size_t ordinal : picks) {
            s.golden_tools.insert(corpus.at(ordinal).id);
            bool dropped = sample_rng.next_double() < spec.keyword_dropout;
            if (!dropped) text += " " + vocab_word(ordinal);
        }
        text += " " + kQueryTails[sample_rng.next_below(kQueryTails.size())];
        s.query = std::move(text);
        if (i < train_count) {
            samples.train.push_back(std::move(s));
        } else {
            samples.test.push_back(std::move(s));
        }
    }
    return {std::move(corpus), std::move(samples)};
}

} // namespace mtr
