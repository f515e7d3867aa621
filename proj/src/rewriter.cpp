#include "mtr/rewriter.hpp"

#include <sstream>

#include "mtr/errors.hpp"
#include "mtr/text.hpp"

namespace mtr {

const char* to_string(RewriteSource source) {
    switch (source) {
        case RewriteSource::Remote: return "remote";
        case RewriteSource::MockIdentity: return "mock-identity";
        case RewriteSource::MockGoldenOracle: return "mock-golden-oracle";
        case RewriteSource::MockNoise: return "mock-noise";
    }
    return "unknown";
}

ToolSubset sample_subset(const ToolCorpus& corpus, size_t s, Rng& rng) {
    if (s < 1) throw Error("sample_subset: s must be >= 1");
    if (s > corpus.size()) {
        throw Error("sample_subset: s (" + std::to_string(s) + ") exceeds corpus size (" +
                    std::to_string(corpus.size()) + ")");
    }
    ToolSubset subset;
    subset.tools.reserve(s);
    for (size_t ordinal : rng.sample_indices(corpus.size(), s)) {
        subset.tools.push_back(&corpus.at(ordinal));
    }
    return subset;
}

namespace {

constexpr const char* kTemplateId = "qta-v1";
constexpr const char* kSystemPrompt =
    "You rewrite user queries so a retrieval system can find the right tools. "
    "Reply with the rewritten query only.";

void check_template(const std::string& template_id) {
    if (template_id != kTemplateId) {
        throw Error("unknown prompt template id: \"" + template_id + "\"");
    }
}

} // namespace

std::string system_prompt(const std::string& template_id) {
    check_template(template_id);
    return kSystemPrompt;
}

std::string build_prompt(const std::string& query, const ToolSubset& subset,
                         const std::string& template_id) {
    check_template(template_id);
    std::string prompt = "Tools:\n";
    for (const ToolRecord* tool : subset.tools) {
        prompt += tool->name;
        prompt += ": ";
        prompt += tool->description;
        prompt += '\n';
    }
    prompt += "Query: ";
    prompt += query;
    prompt += "\nRewritten query:";
    return prompt;
}

RewrittenQuery IdentityRewriter::rewrite(const RewriteRequest& request) const {
    return {collapse_to_single_line(request.query), RewriteSource::MockIdentity,
            request.temperature, request.seed};
}

RewrittenQuery GoldenOracleRewriter::rewrite(const RewriteRequest& request) const {
    if (request.golden_names.empty()) {
        throw Error("golden-oracle rewriter requires golden labels");
    }
    std::string text = request.query;
    for (const auto& name : request.golden_names) {
        text += ' ';
        text += name;
    }
    return {collapse_to_single_line(text), RewriteSource::MockGoldenOracle, request.temperature,
            request.seed};
}

RewrittenQuery NoiseRewriter::rewrite(const RewriteRequest& request) const {
    std::vector<std::string> words;
    std::istringstream stream(request.query);
    std::string word;
    while (stream >> word) words.push_back(word);

    Rng rng(request.seed);
    rng.shuffle(words);

    std::string text;
    for (const auto& w : words) {
        if (!text.empty()) text += ' ';
        text += w;
    }
    return {collapse_to_single_line(text), RewriteSource::MockNoise, request.temperature,
            request.seed};
}

RemoteRewriter::RemoteRewriter(HttpEndpoint endpoint, std::string model)
    : endpoint_(std::move(endpoint)), model_(std::move(model)) {}

RewrittenQuery RemoteRewriter::rewrite(const RewriteRequest& request) const {
    if (!request.subset) throw Error("remote rewriter: missing tool subset");
    nlohmann::json body{
        {"model", model_},
        {"messages",
         {{{"role", "system"}, {"content", system_prompt(request.prompt_template_id)}},
          {{"role", "user"},
           {"content", build_prompt(request.query, *request.subset, request.prompt_template_id)}}}},
        {"temperature", request.temperature}};
    nlohmann::json res = post_json(endpoint_, body);
    if (!res.contains("choices") || !res["choices"].is_array() || res["choices"].empty() ||
        !res["choices"][0].contains("message") ||
        !res["choices"][0]["message"].contains("content") ||
        !res["choices"][0]["message"]["content"].is_string()) {
        throw RemoteError("chat endpoint returned malformed completion");
    }
    std::string text =
        collapse_to_single_line(res["choices"][0]["message"]["content"].get<std::string>());
    if (text.empty()) throw RemoteError("chat endpoint returned an empty completion");
    return {std::move(text), RewriteSource::Remote, request.temperature, request.seed};
}

RewrittenQuery rewrite_once(const Rewriter& rewriter, const std::string& query,
                            const ToolSubset& subset, const RewriteConfig& cfg,
                            std::vector<std::string> golden_names) {
    RewriteRequest request;
    request.query = query;
    request.subset = &subset;
    request.temperature = cfg.temperature;
    request.seed = cfg.seed;
    request.prompt_template_id = cfg.prompt_template_id;
    request.golden_names = std::move(golden_names);
    return rewriter.rewrite(request);
}

std::pair<RewrittenQuery, RewrittenQuery> rewrite_pair(const Rewriter& first,
                                                       const Rewriter& second,
                                                       const std::string& query,
                                                       const ToolSubset& subset,
                                                       const RewriteConfig& cfg,
                                                       std::vector<std::string> golden_names) {
    RewriteConfig draw = cfg;
    draw.seed = derive_seed(cfg.seed, 0);
    RewrittenQuery a = rewrite_once(first, query, subset, draw, golden_names);
    draw.seed = derive_seed(cfg.seed, 1);
    RewrittenQuery b = rewrite_once(second, query, subset, draw, std::move(golden_names));
    return {std::move(a), std::move(b)};
}

std::pair<RewrittenQuery, RewrittenQuery> rewrite_pair(const Rewriter& rewriter,
                                                       const std::string& query,
                                                       const ToolSubset& subset,
                                                       const RewriteConfig& cfg,
                                                       std::vector<std::string> golden_names) {
    return rewrite_pair(rewriter, rewriter, query, subset, cfg, std::move(golden_names));
}

} // namespace mtr
