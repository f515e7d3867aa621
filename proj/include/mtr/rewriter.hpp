#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mtr/corpus.hpp"
#include "mtr/http_client.hpp"
#include "mtr/rng.hpp"

namespace mtr {

struct RewriteConfig {
    size_t subset_size = 5;   // tools shown to the rewriter as context
    double temperature = 1.0; // pair generation default; evaluation uses 0
    std::string prompt_template_id = "qta-v1";
    uint64_t seed = 0;
};

/// Random subset of the corpus that fits the rewriter's context window.
/// Sampled independently of any golden labels.
struct ToolSubset {
    std::vector<const ToolRecord*> tools;
};

ToolSubset sample_subset(const ToolCorpus& corpus, size_t s, Rng& rng);

enum class RewriteSource { Remote, MockIdentity, MockGoldenOracle, MockNoise };

const char* to_string(RewriteSource source);

struct RewrittenQuery {
    std::string text; // trimmed, single-line
    RewriteSource source = RewriteSource::MockIdentity;
    double temperature = 0.0;
    uint64_t seed = 0;
};

struct RewriteRequest {
    std::string query;
    const ToolSubset* subset = nullptr;
    double temperature = 0.0;
    uint64_t seed = 0;
    std::string prompt_template_id = "qta-v1";
    /// Golden tool names, supplied only by callers that see labels
    /// (pair generation, evaluation of annotated samples).
    std::vector<std::string> golden_names;
};

class Rewriter {
public:
    virtual ~Rewriter() = default;
    virtual RewrittenQuery rewrite(const RewriteRequest& request) const = 0;
    virtual std::string describe() const = 0;
    /// True when the rewriter needs golden labels and must be refused
    /// anywhere labels are unavailable.
    virtual bool requires_golden() const { return false; }
};

class IdentityRewriter : public Rewriter {
public:
    RewrittenQuery rewrite(const RewriteRequest& request) const override;
    std::string describe() const override { return "identity"; }
};

/// Test-only oracle: appends the golden tools' names to the query, the
/// best rewrite reachable by construction on synthetic corpora.
class GoldenOracleRewriter : public Rewriter {
public:
    RewrittenQuery rewrite(const RewriteRequest& request) const override;
    std::string describe() const override { return "golden-oracle"; }
    bool requires_golden() const override { return true; }
};

/// Seed-deterministic shuffle of the query's whitespace-separated words.
class NoiseRewriter : public Rewriter {
public:
    RewrittenQuery rewrite(const RewriteRequest& request) const override;
    std::string describe() const override { return "noise"; }
};

/// Chat-completion endpoint speaking
///   POST {"model": str, "messages": [{"role": ..., "content": ...}...],
///         "temperature": float}
///   ->   {"choices": [{"message": {"content": str}}]}
class RemoteRewriter : public Rewriter {
public:
    RemoteRewriter(HttpEndpoint endpoint, std::string model);

    RewrittenQuery rewrite(const RewriteRequest& request) const override;
    std::string describe() const override { return "remote:" + model_; }

private:
    HttpEndpoint endpoint_;
    std::string model_;
};

/// User message of the prompt: one "name: description" line per subset tool,
/// then the query. Throws on an unknown template id.
std::string build_prompt(const std::string& query, const ToolSubset& subset,
                         const std::string& template_id);
std::string system_prompt(const std::string& template_id);

RewrittenQuery rewrite_once(const Rewriter& rewriter, const std::string& query,
                            const ToolSubset& subset, const RewriteConfig& cfg,
                            std::vector<std::string> golden_names = {});

/// Two independent generations from seeds derive(cfg.seed, 0) and
/// derive(cfg.seed, 1). The two draws may come from different rewriters
/// (used by oracle-vs-noise experiments); the common case passes the same
/// rewriter twice.
std::pair<RewrittenQuery, RewrittenQuery> rewrite_pair(const Rewriter& first,
                                                       const Rewriter& second,
                                                       const std::string& query,
                                                       const ToolSubset& subset,
                                                       const RewriteConfig& cfg,
                                                       std::vector<std::string> golden_names = {});

std::pair<RewrittenQuery, RewrittenQuery> rewrite_pair(const Rewriter& rewriter,
                                                       const std::string& query,
                                                       const ToolSubset& subset,
                                                       const RewriteConfig& cfg,
                                                       std::vector<std::string> golden_names = {});

} // namespace mtr
