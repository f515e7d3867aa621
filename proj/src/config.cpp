#include "mtr/config.hpp"

#include <functional>
#include <map>

#include <json.hpp>

#include "mtr/corpus.hpp"
#include "mtr/errors.hpp"
#include "mtr/text.hpp"

namespace mtr {

using nlohmann::json;

std::vector<size_t> parse_size_list(const std::string& text) {
    std::vector<size_t> out;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t comma = text.find(',', pos);
        std::string item = trim(text.substr(pos, comma == std::string::npos ? std::string::npos
                                                                            : comma - pos));
        if (!item.empty()) {
            size_t parsed = 0;
            try {
                parsed = std::stoull(item);
            } catch (const std::exception&) {
                throw Error("cannot parse integer list item: \"" + item + "\"");
            }
            out.push_back(parsed);
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (out.empty()) throw Error("empty integer list: \"" + text + "\"");
    return out;
}

namespace {

uint64_t parse_u64(const std::string& value, const std::string& key) {
    try {
        return std::stoull(trim(value));
    } catch (const std::exception&) {
        throw Error("config: cannot parse integer for " + key + ": \"" + value + "\"");
    }
}

double parse_dbl(const std::string& value, const std::string& key) {
    try {
        return std::stod(trim(value));
    } catch (const std::exception&) {
        throw Error("config: cannot parse number for " + key + ": \"" + value + "\"");
    }
}

using Setter = std::function<void(AppConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"tools", [](AppConfig& c, const std::string& v) { c.tools_path = v; }},
        {"samples", [](AppConfig& c, const std::string& v) { c.samples_path = v; }},
        {"embeddings", [](AppConfig& c, const std::string& v) { c.embeddings_path = v; }},
        {"out", [](AppConfig& c, const std::string& v) { c.out_path = v; }},
        {"retriever", [](AppConfig& c, const std::string& v) { c.retriever = v; }},
        {"provider", [](AppConfig& c, const std::string& v) { c.provider = v; }},
        {"hash_dim", [](AppConfig& c, const std::string& v) { c.hash_dim = parse_u64(v, "hash_dim"); }},
        {"embed_endpoint", [](AppConfig& c, const std::string& v) { c.embed_endpoint = v; }},
        {"embed_model", [](AppConfig& c, const std::string& v) { c.embed_model = v; }},
        {"rewriter", [](AppConfig& c, const std::string& v) { c.rewriter = v; }},
        {"s", [](AppConfig& c, const std::string& v) { c.subset_size = parse_u64(v, "s"); }},
        {"temperature",
         [](AppConfig& c, const std::string& v) { c.temperature = parse_dbl(v, "temperature"); }},
        {"rewrite_endpoint", [](AppConfig& c, const std::string& v) { c.rewrite_endpoint = v; }},
        {"rewrite_model", [](AppConfig& c, const std::string& v) { c.rewrite_model = v; }},
        {"template", [](AppConfig& c, const std::string& v) { c.prompt_template = v; }},
        {"n", [](AppConfig& c, const std::string& v) { c.score_n = parse_u64(v, "n"); }},
        {"beta", [](AppConfig& c, const std::string& v) { c.beta = parse_dbl(v, "beta"); }},
        {"m", [](AppConfig& c, const std::string& v) { c.m = parse_u64(v, "m"); }},
        {"lr", [](AppConfig& c, const std::string& v) { c.learning_rate = parse_dbl(v, "lr"); }},
        {"epochs", [](AppConfig& c, const std::string& v) { c.epochs = parse_u64(v, "epochs"); }},
        {"batch", [](AppConfig& c, const std::string& v) { c.batch = parse_u64(v, "batch"); }},
        {"feature_dim",
         [](AppConfig& c, const std::string& v) { c.feature_dim = parse_u64(v, "feature_dim"); }},
        {"k", [](AppConfig& c, const std::string& v) { c.ks = parse_size_list(v); }},
        {"trials", [](AppConfig& c, const std::string& v) { c.trials = parse_u64(v, "trials"); }},
        {"tool_count",
         [](AppConfig& c, const std::string& v) { c.tool_count = parse_u64(v, "tool_count"); }},
        {"sample_count",
         [](AppConfig& c, const std::string& v) { c.sample_count = parse_u64(v, "sample_count"); }},
        {"vocab_size",
         [](AppConfig& c, const std::string& v) { c.vocab_size = parse_u64(v, "vocab_size"); }},
        {"dropout", [](AppConfig& c, const std::string& v) { c.dropout = parse_dbl(v, "dropout"); }},
        {"golden_sizes",
         [](AppConfig& c, const std::string& v) { c.golden_sizes = parse_size_list(v); }},
        {"min_tokens",
         [](AppConfig& c, const std::string& v) { c.min_tokens = parse_u64(v, "min_tokens"); }},
        {"max_tokens",
         [](AppConfig& c, const std::string& v) { c.max_tokens = parse_u64(v, "max_tokens"); }},
        {"seed", [](AppConfig& c, const std::string& v) { c.seed = parse_u64(v, "seed"); }},
        {"workers", [](AppConfig& c, const std::string& v) { c.workers = parse_u64(v, "workers"); }},
    };
    return table;
}

} // namespace

void apply_config_file(AppConfig& cfg, const std::string& path) {
    std::string content = read_file(path);
    size_t line_no = 0;
    size_t pos = 0;
    while (pos <= content.size()) {
        size_t eol = content.find('\n', pos);
        size_t len = (eol == std::string::npos ? content.size() : eol) - pos;
        ++line_no;
        std::string line = trim(std::string_view(content.data() + pos, len));
        if (!line.empty() && line[0] != '#' && line[0] != ';') {
            if (line.front() == '[') {
                if (line.back() != ']' || line.size() < 3) {
                    throw Error(path + ":" + std::to_string(line_no) + ": malformed section header");
                }
                // Sections are organizational; keys address the config directly.
            } else {
                size_t eq = line.find('=');
                if (eq == std::string::npos) {
                    throw Error(path + ":" + std::to_string(line_no) + ": expected key = value");
                }
                std::string key = trim(line.substr(0, eq));
                std::string value = trim(line.substr(eq + 1));
                auto it = setters().find(key);
                if (it == setters().end()) {
                    throw Error(path + ":" + std::to_string(line_no) + ": unknown config key \"" +
                                key + "\"");
                }
                it->second(cfg, value);
            }
        }
        if (eol == std::string::npos) break;
        pos = eol + 1;
    }
}

std::string AppConfig::to_json() const {
    json doc{{"tools", tools_path},
             {"samples", samples_path},
             {"embeddings", embeddings_path},
             {"out", out_path},
             {"retriever", retriever},
             {"provider", provider},
             {"hash_dim", hash_dim},
             {"rewriter", rewriter},
             {"s", subset_size},
             {"temperature", temperature},
             {"template", prompt_template},
             {"n", score_n},
             {"beta", beta},
             {"m", m},
             {"lr", learning_rate},
             {"epochs", epochs},
             {"batch", batch},
             {"feature_dim", feature_dim},
             {"k", ks},
             {"trials", trials},
             {"seed", seed},
             {"workers", workers}};
    if (!embed_endpoint.empty()) doc["embed_endpoint"] = embed_endpoint;
    if (!embed_model.empty()) doc["embed_model"] = embed_model;
    if (!rewrite_endpoint.empty()) doc["rewrite_endpoint"] = rewrite_endpoint;
    if (!rewrite_model.empty()) doc["rewrite_model"] = rewrite_model;
    return doc.dump();
}

} // namespace mtr
