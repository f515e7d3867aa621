#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mtr/corpus.hpp"
#include "mtr/retrieval.hpp"
#include "mtr/rewriter.hpp"

namespace mtr {

struct EvalConfig {
    std::vector<size_t> ks = {5, 10}; // evaluation cutoffs, each <= M at use time
    uint64_t seed = 0;
    size_t trials = 10000; // random-baseline permutations per sample
    size_t workers = 1;
};

/// Fraction of golden tools appearing in the top-k results.
double recall_at_k(const Ranking& ranking, const std::set<std::string>& golden, size_t k);

/// 1 iff every golden tool appears in the top-k results; emphasizes
/// completeness where recall would award partial credit.
double sufficiency_at_k(const Ranking& ranking, const std::set<std::string>& golden, size_t k);

/// Binary-relevance NDCG with the canonical log2(rank+1) discount and the
/// ideal gain truncated at min(|golden|, k).
double ndcg_at_k(const Ranking& ranking, const std::set<std::string>& golden, size_t k);

struct MetricRow {
    std::string query_id;
    std::map<size_t, double> recall;
    std::map<size_t, double> sufficiency;
    std::map<size_t, double> ndcg;
};

struct EvalReport {
    std::vector<MetricRow> rows; // ordered by query_id
    // metric name -> k -> mean over rows, in percent
    std::map<std::string, std::map<size_t, double>> aggregates;
    size_t rewrite_fallbacks = 0; // samples evaluated on the raw query after rewriter failure
    std::string retriever;
    std::string rewriter; // "none" when evaluating raw queries
    uint64_t seed = 0;
};

/// Evaluate a retriever over the test split, optionally rewriting each query
/// first (temperature 0, one rewrite, fresh tool subset per query). Rewriter
/// failures fall back to the raw query and are counted.
EvalReport evaluate(const Retriever& retriever, const ToolCorpus& corpus,
                    const std::vector<QuerySample>& samples, const EvalConfig& cfg,
                    const Rewriter* rewriter = nullptr,
                    const RewriteConfig* rewrite_cfg = nullptr);

/// Random Guess baseline: metrics averaged over seed-deterministic uniform
/// permutations of the corpus, `trials` per sample.
EvalReport random_baseline(const ToolCorpus& corpus, const std::vector<QuerySample>& samples,
                           const EvalConfig& cfg);

/// JSON document: config echo, per-sample rows, aggregates.
std::string report_to_json(const EvalReport& report, const std::string& config_echo_json);
/// CSV with columns metric,k,value_percent.
std::string report_to_csv(const EvalReport& report);

} // namespace mtr
