#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mtr {

/// Effective run configuration. Values come from built-in defaults, then an
/// optional config file, then command-line flags, in that order of
/// precedence. Secrets never live here: the API key is read from the
/// MTR_API_KEY environment variable at request time.
struct AppConfig {
    // paths
    std::string tools_path;
    std::string samples_path;
    std::string embeddings_path;
    std::string out_path;

    // retrieval
    std::string retriever = "bm25"; // bm25 | dense ("random" accepted by eval only)
    std::string provider = "hashed"; // hashed | file | remote
    size_t hash_dim = 256;
    std::string embed_endpoint;
    std::string embed_model;

    // rewriting
    std::string rewriter = "none"; // none | identity | noise | golden-oracle | remote
    size_t subset_size = 5;
    double temperature = 1.0;
    std::string rewrite_endpoint;
    std::string rewrite_model;
    std::string prompt_template = "qta-v1";

    // candidate scoring
    size_t score_n = 10;

    // dpo
    double beta = 0.1;
    size_t m = 100;
    double learning_rate = 0.1;
    size_t epochs = 3;
    size_t batch = 32;
    size_t feature_dim = 4096;

    // evaluation
    std::vector<size_t> ks = {5, 10};
    size_t trials = 10000;

    // synthetic corpus
    size_t tool_count = 200;
    size_t sample_count = 100;
    size_t vocab_size = 1000;
    double dropout = 0.0;
    std::vector<size_t> golden_sizes = {1, 2, 3};

    // validation
    std::optional<size_t> min_tokens;
    std::optional<size_t> max_tokens;

    // global
    uint64_t seed = 0;
    size_t workers = 0; // 0 = all cores, 1 = fully serial

    /// JSON echo of the effective configuration, embedded in reports.
    std::string to_json() const;
};

/// Apply a sectioned key=value config file on top of cfg. Sections group
/// keys for readability; keys are globally unique. Unknown keys are errors.
void apply_config_file(AppConfig& cfg, const std::string& path);

std::vector<size_t> parse_size_list(const std::string& text);

} // namespace mtr
