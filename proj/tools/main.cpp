#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtr/config.hpp"
#include "mtr/corpus.hpp"
#include "mtr/dpo.hpp"
#include "mtr/embedding.hpp"
#include "mtr/errors.hpp"
#include "mtr/log.hpp"
#include "mtr/metrics.hpp"
#include "mtr/qscore.hpp"
#include "mtr/retrieval.hpp"
#include "mtr/rewriter.hpp"

namespace {

using namespace mtr;
using nlohmann::json;

std::shared_ptr<const EmbeddingProvider> make_provider(const AppConfig& cfg) {
    if (cfg.provider == "hashed") {
        return std::make_shared<HashedEmbeddingProvider>(cfg.hash_dim);
    }
    if (cfg.provider == "file") {
        if (cfg.embeddings_path.empty()) {
            throw Error("provider \"file\" needs --embeddings");
        }
        return std::make_shared<FileEmbeddingProvider>(cfg.embeddings_path);
    }
    if (cfg.provider == "remote") {
        if (cfg.embed_endpoint.empty()) {
            throw Error("provider \"remote\" needs --embed-endpoint");
        }
        HttpEndpoint endpoint;
        endpoint.url = cfg.embed_endpoint;
        return std::make_shared<RemoteEmbeddingProvider>(endpoint, cfg.embed_model);
    }
    throw Error("unknown embedding provider \"" + cfg.provider + "\" (hashed|file|remote)");
}

std::unique_ptr<Retriever> make_retriever(const AppConfig& cfg, const ToolCorpus& corpus) {
    if (cfg.retriever == "bm25") {
        return std::make_unique<Bm25Index>(corpus);
    }
    if (cfg.retriever == "dense") {
        return std::make_unique<DenseIndex>(corpus, make_provider(cfg), cfg.workers);
    }
    throw Error("unknown retriever \"" + cfg.retriever + "\" (bm25|dense)");
}

std::unique_ptr<Rewriter> make_rewriter(const std::string& kind, const AppConfig& cfg) {
    if (kind == "identity") return std::make_unique<IdentityRewriter>();
    if (kind == "noise") return std::make_unique<NoiseRewriter>();
    if (kind == "golden-oracle") return std::make_unique<GoldenOracleRewriter>();
    if (kind == "remote") {
        if (cfg.rewrite_endpoint.empty()) {
            throw Error("rewriter \"remote\" needs --rewrite-endpoint");
        }
        HttpEndpoint endpoint;
        endpoint.url = cfg.rewrite_endpoint;
        return std::make_unique<RemoteRewriter>(endpoint, cfg.rewrite_model);
    }
    throw Error("unknown rewriter \"" + kind + "\" (identity|noise|golden-oracle|remote)");
}

RewriteConfig rewrite_config(const AppConfig& cfg) {
    RewriteConfig rc;
    rc.subset_size = cfg.subset_size;
    rc.temperature = cfg.temperature;
    rc.prompt_template_id = cfg.prompt_template;
    rc.seed = cfg.seed;
    return rc;
}

int cmd_corpus_validate(const AppConfig& cfg) {
    if (cfg.tools_path.empty()) throw Error("corpus validate needs --tools");
    ToolCorpus corpus = load_tools(cfg.tools_path);
    if (!cfg.samples_path.empty()) {
        std::vector<std::string> warnings;
        SampleSet samples = load_samples(cfg.samples_path, corpus, &warnings);
        for (const auto& w : warnings) log_warn(w);
        log_info("samples ok: " + std::to_string(samples.train.size()) + " train, " +
                 std::to_string(samples.test.size()) + " test");
    }
    std::optional<std::pair<size_t, size_t>> range;
    if (cfg.min_tokens && cfg.max_tokens) {
        range = std::make_pair(*cfg.min_tokens, *cfg.max_tokens);
    } else if (cfg.min_tokens || cfg.max_tokens) {
        throw Error("give both --min-tokens and --max-tokens or neither");
    }
    ValidationReport report = validate_corpus(corpus, range);
    json per_tool = json::array();
    for (const auto& t : report.per_tool) {
        per_tool.push_back({{"id", t.id}, {"tokens", t.tokens}});
    }
    json doc{{"tools", corpus.size()},
             {"min_tokens", report.min_tokens},
             {"median_tokens", report.median_tokens},
             {"max_tokens", report.max_tokens},
             {"warnings", report.warnings},
             {"per_tool", per_tool}};
    std::cout << doc.dump(2) << "\n";
    for (const auto& w : report.warnings) log_warn(w);
    return 0;
}

int cmd_corpus_synth(const AppConfig& cfg) {
    if (cfg.tools_path.empty() || cfg.samples_path.empty()) {
        throw Error("corpus synth needs --tools and --samples output paths");
    }
    SynthSpec spec;
    spec.tool_count = cfg.tool_count;
    spec.sample_count = cfg.sample_count;
    spec.vocabulary_size = cfg.vocab_size;
    spec.keyword_dropout = cfg.dropout;
    spec.golden_per_sample = std::set<size_t>(cfg.golden_sizes.begin(), cfg.golden_sizes.end());
    spec.seed = cfg.seed;
    auto [corpus, samples] = synth_generate(spec);
    write_file(cfg.tools_path, serialize_tools(corpus));
    write_file(cfg.samples_path, serialize_samples(samples));
    log_info("synthesized " + std::to_string(corpus.size()) + " tools, " +
             std::to_string(samples.train.size()) + " train + " +
             std::to_string(samples.test.size()) + " test samples");
    return 0;
}

int cmd_retrieve(const AppConfig& cfg, const std::string& query) {
    if (cfg.tools_path.empty()) throw Error("retrieve needs --tools");
    if (query.empty()) throw Error("retrieve needs --query");
    ToolCorpus corpus = load_tools(cfg.tools_path);
    size_t k = *std::max_element(cfg.ks.begin(), cfg.ks.end());
    if (k < 1 || k > corpus.size()) {
        throw Error("k (" + std::to_string(k) + ") must lie in [1, M=" +
                    std::to_string(corpus.size()) + "]");
    }
    auto retriever = make_retriever(cfg, corpus);
    Ranking ranking = retriever->rank_full(query);
    for (size_t i = 0; i < k; ++i) {
        const auto& entry = ranking.entries()[i];
        std::cout << (i + 1) << "\t" << json(entry.score).dump() << "\t" << entry.id << "\t"
                  << corpus.by_id(entry.id).name << "\n";
    }
    return 0;
}

int cmd_eval(const AppConfig& cfg) {
    if (cfg.tools_path.empty() || cfg.samples_path.empty()) {
        throw Error("eval needs --tools and --samples");
    }
    ToolCorpus corpus = load_tools(cfg.tools_path);
    std::vector<std::string> warnings;
    SampleSet samples = load_samples(cfg.samples_path, corpus, &warnings);
    for (const auto& w : warnings) log_warn(w);
    if (samples.test.empty()) throw Error("eval: test split is empty");

    EvalConfig eval_cfg;
    eval_cfg.ks = cfg.ks;
    eval_cfg.seed = cfg.seed;
    eval_cfg.trials = cfg.trials;
    eval_cfg.workers = cfg.workers;

    EvalReport report;
    if (cfg.retriever == "random") {
        if (cfg.rewriter != "none") throw Error("the random baseline takes no rewriter");
        report = random_baseline(corpus, samples.test, eval_cfg);
    } else {
        auto retriever = make_retriever(cfg, corpus);
        std::unique_ptr<Rewriter> rewriter;
        RewriteConfig rc = rewrite_config(cfg);
        if (cfg.rewriter != "none") rewriter = make_rewriter(cfg.rewriter, cfg);
        report = evaluate(*retriever, corpus, samples.test, eval_cfg, rewriter.get(),
                          rewriter ? &rc : nullptr);
    }

    std::string prefix = cfg.out_path.empty() ? "eval_report" : cfg.out_path;
    write_file(prefix + ".json", report_to_json(report, cfg.to_json()));
    write_file(prefix + ".csv", report_to_csv(report));
    for (const auto& [metric, by_k] : report.aggregates) {
        for (const auto& [k, v] : by_k) {
            log_info(metric + "@" + std::to_string(k) + " = " + json(v).dump() + "%");
        }
    }
    if (report.rewrite_fallbacks > 0) {
        log_warn(std::to_string(report.rewrite_fallbacks) + " samples fell back to raw queries");
    }
    log_info("wrote " + prefix + ".json and " + prefix + ".csv");
    return 0;
}

int cmd_dpo_gen(const AppConfig& cfg) {
    if (cfg.tools_path.empty() || cfg.samples_path.empty()) {
        throw Error("dpo gen needs --tools and --samples");
    }
    if (cfg.rewriter == "none") {
        throw Error("dpo gen needs --rewriter (one kind, or two comma-separated kinds)");
    }
    ToolCorpus corpus = load_tools(cfg.tools_path);
    std::vector<std::string> warnings;
    SampleSet samples = load_samples(cfg.samples_path, corpus, &warnings);
    for (const auto& w : warnings) log_warn(w);
    if (samples.train.empty()) throw Error("dpo gen: train split is empty");

    // "--rewriter a,b" draws the first rewrite from a and the second from b.
    std::string first_kind = cfg.rewriter;
    std::string second_kind = cfg.rewriter;
    if (size_t comma = cfg.rewriter.find(','); comma != std::string::npos) {
        first_kind = cfg.rewriter.substr(0, comma);
        second_kind = cfg.rewriter.substr(comma + 1);
    }
    auto first = make_rewriter(first_kind, cfg);
    auto second = make_rewriter(second_kind, cfg);
    auto retriever = make_retriever(cfg, corpus);

    PairGenDeps deps;
    deps.corpus = &corpus;
    deps.retriever = retriever.get();
    deps.first_rewriter = first.get();
    deps.second_rewriter = second.get();
    deps.score_cfg.n = cfg.score_n;
    deps.rewrite_cfg = rewrite_config(cfg);

    DatasetGenStats stats;
    DpoDataset dataset =
        generate_dataset(samples.train, deps, cfg.m, cfg.seed, cfg.workers, &stats);
    std::string out = cfg.out_path.empty() ? "dpo_dataset.jsonl" : cfg.out_path;
    export_dataset(dataset, out);

    json summary{{"pairs", stats.emitted},
                 {"skipped_tied", stats.skipped_tied},
                 {"skipped_failed", stats.skipped_failed},
                 {"query_beats_both", stats.query_beats_both},
                 {"query_below_both", stats.query_below_both},
                 {"out", out}};
    std::cout << summary.dump() << "\n";
    log_info("wrote " + std::to_string(stats.emitted) + " pairs to " + out + " (" +
             std::to_string(stats.skipped_tied) + " tied, " +
             std::to_string(stats.skipped_failed) + " failed)");
    return 0;
}

int cmd_dpo_train(const AppConfig& cfg, const std::string& dataset_path) {
    if (dataset_path.empty()) throw Error("dpo train-toy needs --dataset");
    DpoDataset dataset = import_dataset(dataset_path);
    if (dataset.pairs.empty()) throw Error("dpo train-toy: dataset is empty");

    DpoConfig dpo_cfg;
    dpo_cfg.beta = cfg.beta;
    dpo_cfg.generations_per_sample = cfg.m;
    dpo_cfg.learning_rate = cfg.learning_rate;
    dpo_cfg.epochs = cfg.epochs;
    dpo_cfg.batch_size = cfg.batch;
    dpo_cfg.seed = cfg.seed;
    dpo_cfg.feature_dim = cfg.feature_dim;

    TrainResult result = train_toy_policy(dataset, dpo_cfg);
    for (size_t e = 0; e < result.epoch_losses.size(); ++e) {
        log_info("epoch " + std::to_string(e + 1) + " mean loss " +
                 json(result.epoch_losses[e]).dump());
    }
    PolicyEval eval = evaluate_policy(result.policy, dataset);
    json doc{{"config", json::parse(cfg.to_json())},
             {"feature_dim", result.policy.feature_dim()},
             {"beta", result.policy.beta()},
             {"epoch_losses", result.epoch_losses},
             {"final", {{"mean_loss", eval.mean_loss},
                        {"mean_z", eval.mean_z},
                        {"mean_sigmoid_z", eval.mean_sigmoid_z}}},
             {"weights", result.policy.weights()}};
    std::string out = cfg.out_path.empty() ? "toy_policy.json" : cfg.out_path;
    write_file(out, doc.dump() + "\n");
    log_info("wrote trained policy to " + out);
    return 0;
}

int cmd_rewrite(const AppConfig& cfg, const std::string& query) {
    if (cfg.tools_path.empty()) throw Error("rewrite needs --tools");
    if (query.empty()) throw Error("rewrite needs --query");
    if (cfg.rewriter == "none") throw Error("rewrite needs --rewriter");
    auto rewriter = make_rewriter(cfg.rewriter, cfg);
    if (rewriter->requires_golden()) {
        throw Error("rewriter \"" + cfg.rewriter +
                    "\" needs golden labels and is only available to dpo gen and eval");
    }
    ToolCorpus corpus = load_tools(cfg.tools_path);
    Rng subset_rng(derive_seed(cfg.seed, 0));
    ToolSubset subset = sample_subset(corpus, cfg.subset_size, subset_rng);
    RewriteConfig rc = rewrite_config(cfg);
    rc.seed = derive_seed(cfg.seed, 1);
    std::cout << rewrite_once(*rewriter, query, subset, rc).text << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    AppConfig cfg;

    // The config file applies before flag parsing so flags always win.
    try {
        for (int i = 1; i + 1 < argc; ++i) {
            if (std::string(argv[i]) == "--config") {
                apply_config_file(cfg, argv[i + 1]);
            }
        }
    } catch (const std::exception& e) {
        log_error(e.what());
        return 1;
    }

    CLI::App app{"massive tool retrieval: ranking, rewriting, DPO data, evaluation"};
    app.fallthrough();

    std::string config_path; // consumed above; registered so parsing accepts it
    std::string query;
    std::string dataset_path;
    std::string k_list;
    std::string golden_sizes_list;

    app.add_option("--config", config_path, "config file (key = value with [sections])");
    app.add_option("--tools", cfg.tools_path, "tools JSONL path");
    app.add_option("--samples", cfg.samples_path, "samples JSONL path");
    app.add_option("--embeddings", cfg.embeddings_path, "precomputed embeddings JSONL path");
    app.add_option("--out", cfg.out_path, "output path or prefix");
    app.add_option("--retriever", cfg.retriever, "bm25|dense (eval also accepts random)");
    app.add_option("--provider", cfg.provider, "embedding provider: hashed|file|remote");
    app.add_option("--hash-dim", cfg.hash_dim, "hashed provider dimension");
    app.add_option("--embed-endpoint", cfg.embed_endpoint, "remote embedding endpoint URL");
    app.add_option("--embed-model", cfg.embed_model, "remote embedding model name");
    app.add_option("--rewriter", cfg.rewriter,
                   "none|identity|noise|golden-oracle|remote; dpo gen accepts a,b");
    app.add_option("--rewrite-endpoint", cfg.rewrite_endpoint, "chat completion endpoint URL");
    app.add_option("--rewrite-model", cfg.rewrite_model, "chat completion model name");
    app.add_option("--template", cfg.prompt_template, "prompt template id");
    app.add_option("--query", query, "query text (retrieve, rewrite)");
    app.add_option("--dataset", dataset_path, "DPO dataset path (train-toy)");
    app.add_option("--k", k_list, "comma-separated cutoffs, e.g. 5,10");
    app.add_option("--n", cfg.score_n, "ranking-function cutoff");
    app.add_option("--s", cfg.subset_size, "tool subset size shown to the rewriter");
    app.add_option("--temperature", cfg.temperature, "rewrite temperature for pair generation");
    app.add_option("--m", cfg.m, "DPO generations per annotated sample");
    app.add_option("--beta", cfg.beta, "DPO beta");
    app.add_option("--epochs", cfg.epochs, "toy training epochs");
    app.add_option("--batch", cfg.batch, "toy training batch size");
    app.add_option("--lr", cfg.learning_rate, "toy training learning rate");
    app.add_option("--feature-dim", cfg.feature_dim, "toy policy feature dimension");
    app.add_option("--trials", cfg.trials, "random baseline trials per sample");
    app.add_option("--tool-count", cfg.tool_count, "synth: number of tools");
    app.add_option("--sample-count", cfg.sample_count, "synth: number of samples");
    app.add_option("--vocab-size", cfg.vocab_size, "synth: vocabulary size");
    app.add_option("--dropout", cfg.dropout, "synth: keyword dropout probability");
    app.add_option("--golden-sizes", golden_sizes_list, "synth: comma list of golden set sizes");
    app.add_option("--min-tokens", [&cfg](const CLI::results_t& res) {
        try {
            cfg.min_tokens = std::stoull(res[0]);
            return true;
        } catch (const std::exception&) {
            return false;
        }
    }, "validate: expected minimum description tokens");
    app.add_option("--max-tokens", [&cfg](const CLI::results_t& res) {
        try {
            cfg.max_tokens = std::stoull(res[0]);
            return true;
        } catch (const std::exception&) {
            return false;
        }
    }, "validate: expected maximum description tokens");
    app.add_option("--seed", cfg.seed, "global seed");
    app.add_option("--workers", cfg.workers, "worker threads (0 = all cores, 1 = serial)");

    auto* corpus_cmd = app.add_subcommand("corpus", "corpus utilities");
    corpus_cmd->fallthrough();
    corpus_cmd->require_subcommand(1);
    auto* validate_cmd = corpus_cmd->add_subcommand("validate", "load and validate a corpus");
    validate_cmd->fallthrough();
    auto* synth_cmd = corpus_cmd->add_subcommand("synth", "generate a synthetic corpus");
    synth_cmd->fallthrough();
    auto* retrieve_cmd = app.add_subcommand("retrieve", "rank tools for one query");
    retrieve_cmd->fallthrough();
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a retriever on the test split");
    eval_cmd->fallthrough();
    auto* dpo_cmd = app.add_subcommand("dpo", "preference data and toy training");
    dpo_cmd->fallthrough();
    dpo_cmd->require_subcommand(1);
    auto* gen_cmd = dpo_cmd->add_subcommand("gen", "synthesize DPO preference pairs");
    gen_cmd->fallthrough();
    auto* train_cmd = dpo_cmd->add_subcommand("train-toy", "train the toy policy");
    train_cmd->fallthrough();
    auto* rewrite_cmd = app.add_subcommand("rewrite", "rewrite one query");
    rewrite_cmd->fallthrough();
    app.require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (!k_list.empty()) cfg.ks = parse_size_list(k_list);
        if (!golden_sizes_list.empty()) cfg.golden_sizes = parse_size_list(golden_sizes_list);

        if (validate_cmd->parsed()) return cmd_corpus_validate(cfg);
        if (synth_cmd->parsed()) return cmd_corpus_synth(cfg);
        if (retrieve_cmd->parsed()) return cmd_retrieve(cfg, query);
        if (eval_cmd->parsed()) return cmd_eval(cfg);
        if (gen_cmd->parsed()) return cmd_dpo_gen(cfg);
        if (train_cmd->parsed()) return cmd_dpo_train(cfg, dataset_path);
        if (rewrite_cmd->parsed()) return cmd_rewrite(cfg, query);
        throw Error("no subcommand given");
    } catch (const RemoteError& e) {
        log_error(e.what());
        return 2;
    } catch (const std::exception& e) {
        log_error(e.what());
        return 1;
    }
}
