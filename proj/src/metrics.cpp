#include "mtr/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "mtr/errors.hpp"
#include "mtr/log.hpp"
#include "mtr/qscore.hpp"
#include "mtr/rng.hpp"
#include "mtr/worker_pool.hpp"

namespace mtr {

using nlohmann::json;

namespace {

void check_metric_args(const Ranking& ranking, const std::set<std::string>& golden, size_t k) {
    if (golden.empty()) throw Error("metrics: golden set must be non-empty");
    if (k < 1) throw Error("metrics: k must be >= 1");
    if (k > ranking.size()) {
        throw Error("metrics: k (" + std::to_string(k) + ") exceeds corpus size (" +
                    std::to_string(ranking.size()) + ")");
    }
}

} // namespace

double recall_at_k(const Ranking& ranking, const std::set<std::string>& golden, size_t k) {
    check_metric_args(ranking, golden, k);
    size_t hits = 0;
    for (size_t i = 0; i < k; ++i) {
        if (golden.count(ranking.entries()[i].id)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(golden.size());
}

double sufficiency_at_k(const Ranking& ranking, const std::set<std::string>& golden, size_t k) {
    check_metric_args(ranking, golden, k);
    size_t hits = 0;
    for (size_t i = 0; i < k; ++i) {
        if (golden.count(ranking.entries()[i].id)) ++hits;
    }
    return hits == golden.size() ? 1.0 : 0.0;
}

double ndcg_at_k(const Ranking& ranking, const std::set<std::string>& golden, size_t k) {
    check_metric_args(ranking, golden, k);
    double dcg = 0.0;
    for (size_t i = 1; i <= k; ++i) {
        if (golden.count(ranking.entries()[i - 1].id)) {
            dcg += 1.0 / std::log2(static_cast<double>(i) + 1.0);
        }
    }
    double idcg = 0.0;
    size_t ideal_hits = std::min(golden.size(), k);
    for (size_t i = 1; i <= ideal_hits; ++i) {
        idcg += 1.0 / std::log2(static_cast<double>(i) + 1.0);
    }
    return dcg / idcg;
}

namespace {

MetricRow metrics_for(const std::string& query_id, const Ranking& ranking,
                      const std::set<std::string>& golden, const std::vector<size_t>& ks) {
    MetricRow row;
    row.query_id = query_id;
    for (size_t k : ks) {
        row.recall[k] = recall_at_k(ranking, golden, k);
        row.sufficiency[k] = sufficiency_at_k(ranking, golden, k);
        row.ndcg[k] = ndcg_at_k(ranking, golden, k);
    }
    return row;
}

void finalize_report(EvalReport& report, const std::vector<size_t>& ks) {
    std::sort(report.rows.begin(), report.rows.end(),
              [](const MetricRow& a, const MetricRow& b) { return a.query_id < b.query_id; });
    double n = static_cast<double>(report.rows.size());
    for (size_t k : ks) {
        double recall_sum = 0.0;
        double sufficiency_sum = 0.0;
        double ndcg_sum = 0.0;
        for (const auto& row : report.rows) {
            recall_sum += row.recall.at(k);
            sufficiency_sum += row.sufficiency.at(k);
            ndcg_sum += row.ndcg.at(k);
        }
        report.aggregates["recall"][k] = recall_sum / n * 100.0;
        report.aggregates["sufficiency"][k] = sufficiency_sum / n * 100.0;
        report.aggregates["ndcg"][k] = ndcg_sum / n * 100.0;
    }
}

void check_eval_args(const ToolCorpus& corpus, const std::vector<QuerySample>& samples,
                     const EvalConfig& cfg) {
    if (samples.empty()) throw Error("evaluate: no samples");
    if (cfg.ks.empty()) throw Error("evaluate: no k cutoffs");
    for (size_t k : cfg.ks) {
        if (k < 1 || k > corpus.size()) {
            throw Error("evaluate: k (" + std::to_string(k) + ") must lie in [1, M=" +
                        std::to_string(corpus.size()) + "]");
        }
    }
}

} // namespace

EvalReport evaluate(const Retriever& retriever, const ToolCorpus& corpus,
                    const std::vector<QuerySample>& samples, const EvalConfig& cfg,
                    const Rewriter* rewriter, const RewriteConfig* rewrite_cfg) {
    check_eval_args(corpus, samples, cfg);
    if (rewriter && !rewrite_cfg) throw Error("evaluate: rewriter supplied without its config");

    EvalReport report;
    report.retriever = retriever.describe();
    report.rewriter = rewriter ? rewriter->describe() : "none";
    report.seed = cfg.seed;
    report.rows.resize(samples.size());
    std::vector<uint8_t> fallbacks(samples.size(), 0);

    parallel_for(samples.size(), cfg.workers, [&](size_t i) {
        const QuerySample& sample = samples[i];
        std::string query = sample.query;
        if (rewriter) {
            // Evaluation-time rewriting: one generation at temperature 0 with
            // a fresh subset per query; failures fall back to the raw query.
            try {
                Rng subset_rng(derive_seed(cfg.seed, i * 2));
                ToolSubset subset =
                    sample_subset(corpus, rewrite_cfg->subset_size, subset_rng);
                RewriteConfig once = *rewrite_cfg;
                once.temperature = 0.0;
                once.seed = derive_seed(cfg.seed, i * 2 + 1);
                std::vector<std::string> golden_names;
                for (const auto& id : sample.golden_tools) {
                    golden_names.push_back(corpus.by_id(id).name);
                }
                query = rewrite_once(*rewriter, sample.query, subset, once,
                                     std::move(golden_names))
                            .text;
            } catch (const std::exception& e) {
                log_warn("rewrite failed for " + sample.query_id + ", using raw query: " +
                         e.what());
                query = sample.query;
                fallbacks[i] = 1;
            }
        }
        report.rows[i] = metrics_for(sample.query_id, retriever.rank_full(query),
                                     sample.golden_tools, cfg.ks);
    });

    for (uint8_t f : fallbacks) report.rewrite_fallbacks += f;
    finalize_report(report, cfg.ks);
    return report;
}

EvalReport random_baseline(const ToolCorpus& corpus, const std::vector<QuerySample>& samples,
                           const EvalConfig& cfg) {
    check_eval_args(corpus, samples, cfg);
    if (cfg.trials < 1) throw Error("random_baseline: trials must be >= 1");

    EvalReport report;
    report.retriever = "random";
    report.rewriter = "none";
    report.seed = cfg.seed;
    report.rows.resize(samples.size());

    std::vector<std::string> ids;
    ids.reserve(corpus.size());
    for (const auto& t : corpus.tools()) ids.push_back(t.id);

    parallel_for(samples.size(), cfg.workers, [&](size_t i) {
        const QuerySample& sample = samples[i];
        MetricRow row;
        row.query_id = sample.query_id;
        for (size_t k : cfg.ks) {
            row.recall[k] = 0.0;
            row.sufficiency[k] = 0.0;
            row.ndcg[k] = 0.0;
        }
        Rng rng(derive_seed(cfg.seed, i));
        std::vector<std::string> shuffled = ids;
        for (size_t trial = 0; trial < cfg.trials; ++trial) {
            rng.shuffle(shuffled);
            std::vector<Ranking::Entry> entries;
            entries.reserve(shuffled.size());
            for (const auto& id : shuffled) entries.push_back({id, 0.0});
            Ranking ranking("random-trial", std::move(entries));
            for (size_t k : cfg.ks) {
                row.recall[k] += recall_at_k(ranking, sample.golden_tools, k);
                row.sufficiency[k] += sufficiency_at_k(ranking, sample.golden_tools, k);
                row.ndcg[k] += ndcg_at_k(ranking, sample.golden_tools, k);
            }
        }
        double trials = static_cast<double>(cfg.trials);
        for (size_t k : cfg.ks) {
            row.recall[k] /= trials;
            row.sufficiency[k] /= trials;
            row.ndcg[k] /= trials;
        }
        report.rows[i] = std::move(row);
    });

    finalize_report(report, cfg.ks);
    return report;
}

std::string report_to_json(const EvalReport& report, const std::string& config_echo_json) {
    json rows = json::array();
    for (const auto& row : report.rows) {
        json per_k = json::object();
        for (const auto& [k, v] : row.recall) per_k["recall@" + std::to_string(k)] = v;
        for (const auto& [k, v] : row.sufficiency) per_k["sufficiency@" + std::to_string(k)] = v;
        for (const auto& [k, v] : row.ndcg) per_k["ndcg@" + std::to_string(k)] = v;
        rows.push_back({{"query_id", row.query_id}, {"metrics", per_k}});
    }
    json aggregates = json::object();
    for (const auto& [metric, by_k] : report.aggregates) {
        for (const auto& [k, v] : by_k) {
            aggregates[metric + "@" + std::to_string(k)] = v;
        }
    }
    json doc{{"retriever", report.retriever},
             {"rewriter", report.rewriter},
             {"seed", report.seed},
             {"rewrite_fallbacks", report.rewrite_fallbacks},
             {"aggregates_percent", aggregates},
             {"rows", rows}};
    if (!config_echo_json.empty()) {
        doc["config"] = json::parse(config_echo_json);
    }
    return doc.dump(2) + "\n";
}

std::string report_to_csv(const EvalReport& report) {
    std::string out = "metric,k,value_percent\n";
    for (const auto& [metric, by_k] : report.aggregates) {
        for (const auto& [k, v] : by_k) {
            json value = v; // shortest round-trip float formatting
            out += metric + "," + std::to_string(k) + "," + value.dump() + "\n";
        }
    }
    return out;
}

} // namespace mtr
