#include "mtr/dpo.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "mtr/errors.hpp"
#include "mtr/log.hpp"
#include "mtr/text.hpp"
#include "mtr/worker_pool.hpp"

namespace mtr {

using nlohmann::json;

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    double e = std::exp(z);
    return e / (1.0 + e);
}

double dpo_z(const DpoLossInput& input) {
    if (input.beta <= 0.0) throw Error("dpo_z: beta must be positive");
    double chosen_ratio = input.logp_theta_chosen - input.logp_ref_chosen;
    double rejected_ratio = input.logp_theta_rejected - input.logp_ref_rejected;
    return input.beta * (chosen_ratio - rejected_ratio);
}

double dpo_loss(double z) {
    // softplus(-z), stable on both tails
    if (z >= 0.0) return std::log1p(std::exp(-z));
    return -z + std::log1p(std::exp(z));
}

// ---------------------------------------------------------------------------
// ToyPolicy
// ---------------------------------------------------------------------------

ToyPolicy::ToyPolicy(size_t feature_dim, double beta)
    : ToyPolicy(feature_dim, beta, std::vector<double>(feature_dim, 0.0)) {}

ToyPolicy::ToyPolicy(size_t feature_dim, double beta, std::vector<double> initial_weights)
    : dim_(feature_dim), beta_(beta), weights_(std::move(initial_weights)) {
    if (dim_ == 0) throw Error("toy policy: feature dimension must be positive");
    if (beta_ <= 0.0) throw Error("toy policy: beta must be positive");
    if (weights_.size() != dim_) throw Error("toy policy: initial weight size mismatch");
    ref_weights_ = weights_;
}

void ToyPolicy::set_weights(std::vector<double> weights) {
    if (weights.size() != dim_) throw Error("toy policy: weight size mismatch");
    weights_ = std::move(weights);
}

SparseFeatures ToyPolicy::features(const std::string& prompt,
                                   const std::string& completion) const {
    auto prompt_tokens = tokenize(prompt);
    auto completion_tokens = tokenize(completion);

    std::map<uint32_t, double> acc;
    auto add = [&](uint64_t h) {
        uint32_t bucket = static_cast<uint32_t>(h % dim_);
        acc[bucket] += (h >> 63) ? -1.0 : 1.0;
    };
    for (const auto& c : completion_tokens) {
        add(fnv1a64("u\x1f" + c));
    }
    for (const auto& p : prompt_tokens) {
        for (const auto& c : completion_tokens) {
            add(fnv1a64("x\x1f" + p + "\x1f" + c));
        }
    }

    SparseFeatures out;
    out.entries.reserve(acc.size());
    for (const auto& [idx, value] : acc) {
        if (value != 0.0) out.entries.emplace_back(idx, value);
    }
    return out;
}

ToyPolicy::PairFeatures ToyPolicy::pair_features(const DpoPair& pair) const {
    return {features(pair.prompt, pair.chosen), features(pair.prompt, pair.rejected)};
}

namespace {

double dot(const std::vector<double>& weights, const SparseFeatures& f) {
    double s = 0.0;
    for (const auto& [idx, value] : f.entries) s += weights[idx] * value;
    return s;
}

// log-probs of a two-candidate softmax, stable for large logit gaps
std::pair<double, double> pair_log_probs(double logit_a, double logit_b) {
    double hi = std::max(logit_a, logit_b);
    double lse = hi + std::log1p(std::exp(std::min(logit_a, logit_b) - hi));
    return {logit_a - lse, logit_b - lse};
}

} // namespace

DpoLossInput ToyPolicy::loss_input(const PairFeatures& features) const {
    DpoLossInput input;
    input.beta = beta_;
    auto [theta_ch, theta_rej] =
        pair_log_probs(dot(weights_, features.chosen), dot(weights_, features.rejected));
    auto [ref_ch, ref_rej] =
        pair_log_probs(dot(ref_weights_, features.chosen), dot(ref_weights_, features.rejected));
    input.logp_theta_chosen = theta_ch;
    input.logp_theta_rejected = theta_rej;
    input.logp_ref_chosen = ref_ch;
    input.logp_ref_rejected = ref_rej;
    return input;
}

DpoLossInput ToyPolicy::loss_input(const DpoPair& pair) const {
    return loss_input(pair_features(pair));
}

ToyPolicy::Gradient ToyPolicy::loss_gradient(const PairFeatures& features) const {
    DpoLossInput input = loss_input(features);
    ToyPolicy::Gradient out;
    out.z = dpo_z(input);
    out.loss = dpo_loss(out.z);
    out.dloss_dz = -sigmoid(-out.z);

    // d log pi(c) / dw = phi_c - sum_c' p(c') phi_c'; the softmax expectation
    // term cancels in the chosen-rejected difference but is kept explicit.
    double p_chosen = std::exp(input.logp_theta_chosen);
    double p_rejected = std::exp(input.logp_theta_rejected);

    out.weights_grad.assign(dim_, 0.0);
    double scale = out.dloss_dz * beta_;
    for (const auto& [idx, value] : features.chosen.entries) {
        out.weights_grad[idx] += scale * value * (1.0 - p_chosen);
        out.weights_grad[idx] -= scale * value * (-p_chosen);
    }
    for (const auto& [idx, value] : features.rejected.entries) {
        out.weights_grad[idx] += scale * value * (-p_rejected);
        out.weights_grad[idx] -= scale * value * (1.0 - p_rejected);
    }
    return out;
}

ToyPolicy::Gradient dpo_loss_grad(const DpoLossInput& input, const ToyPolicy& policy,
                                  const DpoPair& pair) {
    if (input.beta != policy.beta()) {
        throw Error("dpo_loss_grad: input beta does not match the policy");
    }
    return policy.loss_gradient(policy.pair_features(pair));
}

// ---------------------------------------------------------------------------
// Pair generation
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> golden_names_for(const QuerySample& sample, const ToolCorpus& corpus) {
    std::vector<std::string> names;
    names.reserve(sample.golden_tools.size());
    for (const auto& id : sample.golden_tools) names.push_back(corpus.by_id(id).name);
    return names;
}

} // namespace

PairOutcome generate_pair(const QuerySample& sample, const PairGenDeps& deps, size_t iteration,
                          uint64_t stream_seed) {
    if (!deps.corpus || !deps.retriever || !deps.first_rewriter || !deps.second_rewriter) {
        throw Error("generate_pair: incomplete dependencies");
    }
    PairOutcome outcome;

    Rng subset_rng(derive_seed(stream_seed, 1));
    ToolSubset subset = sample_subset(*deps.corpus, deps.rewrite_cfg.subset_size, subset_rng);
    std::vector<std::string> golden_names = golden_names_for(sample, *deps.corpus);

    std::pair<RewrittenQuery, RewrittenQuery> rewrites;
    bool rewritten = false;
    const int max_attempts = 3;
    for (int attempt = 0; attempt < max_attempts && !rewritten; ++attempt) {
        RewriteConfig cfg = deps.rewrite_cfg;
        cfg.seed = derive_seed(stream_seed, 2 + static_cast<uint64_t>(attempt));
        try {
            rewrites = rewrite_pair(*deps.first_rewriter, *deps.second_rewriter, sample.query,
                                    subset, cfg, golden_names);
            rewritten = true;
        } catch (const std::exception& e) {
            log_warn("rewrite failed for sample " + sample.query_id + " iteration " +
                     std::to_string(iteration) + " attempt " + std::to_string(attempt + 1) + ": " +
                     e.what());
        }
    }
    if (!rewritten) {
        outcome.skip = PairSkip::RewriterFailed;
        return outcome;
    }

    CandidateScore query_score =
        candidate_score(deps.retriever->rank_full(sample.query), sample.golden_tools,
                        deps.score_cfg);
    CandidateScore first_score =
        candidate_score(deps.retriever->rank_full(rewrites.first.text), sample.golden_tools,
                        deps.score_cfg);
    CandidateScore second_score =
        candidate_score(deps.retriever->rank_full(rewrites.second.text), sample.golden_tools,
                        deps.score_cfg);

    double best_rewrite = std::max(first_score.total, second_score.total);
    double worst_rewrite = std::min(first_score.total, second_score.total);
    outcome.query_beats_both = query_score.total > best_rewrite;
    outcome.query_below_both = query_score.total < worst_rewrite;

    if (first_score.total == second_score.total) {
        outcome.skip = PairSkip::TiedScores;
        return outcome;
    }

    const bool first_chosen = first_score.total > second_score.total;
    const RewrittenQuery& chosen = first_chosen ? rewrites.first : rewrites.second;
    const RewrittenQuery& rejected = first_chosen ? rewrites.second : rewrites.first;

    DpoPair pair;
    pair.prompt = build_prompt(sample.query, subset, deps.rewrite_cfg.prompt_template_id);
    pair.chosen = chosen.text;
    pair.rejected = rejected.text;
    pair.meta.query_id = sample.query_id;
    pair.meta.iteration = iteration;
    pair.meta.seed = stream_seed;
    pair.meta.score_query = query_score.total;
    pair.meta.score_chosen = first_chosen ? first_score.total : second_score.total;
    pair.meta.score_rejected = first_chosen ? second_score.total : first_score.total;
    pair.meta.chosen_source = to_string(chosen.source);
    pair.meta.rejected_source = to_string(rejected.source);
    outcome.pair = std::move(pair);
    return outcome;
}

DpoDataset generate_dataset(const std::vector<QuerySample>& train_samples,
                            const PairGenDeps& deps, size_t m, uint64_t seed, size_t workers,
                            DatasetGenStats* stats) {
    if (m < 1) throw Error("generate_dataset: m must be >= 1");
    size_t total = train_samples.size() * m;
    std::vector<PairOutcome> outcomes(total);

    parallel_for(total, workers, [&](size_t task) {
        size_t sample_index = task / m;
        size_t iteration = task % m;
        outcomes[task] =
            generate_pair(train_samples[sample_index], deps, iteration, derive_seed(seed, task));
    });

    DpoDataset dataset;
    DatasetGenStats local;
    for (auto& outcome : outcomes) {
        if (outcome.query_beats_both) ++local.query_beats_both;
        if (outcome.query_below_both) ++local.query_below_both;
        switch (outcome.skip) {
            case PairSkip::None:
                dataset.pairs.push_back(std::move(*outcome.pair));
                ++local.emitted;
                break;
            case PairSkip::TiedScores: ++local.skipped_tied; break;
            case PairSkip::RewriterFailed: ++local.skipped_failed; break;
        }
    }
    dataset.provenance.corpus_digest = deps.corpus->digest();
    dataset.provenance.config_summary =
        "m=" + std::to_string(m) + " seed=" + std::to_string(seed) +
        " n=" + std::to_string(deps.score_cfg.n) +
        " s=" + std::to_string(deps.rewrite_cfg.subset_size) +
        " retriever=" + deps.retriever->describe() +
        " rewriters=" + deps.first_rewriter->describe() + "," + deps.second_rewriter->describe();
    if (stats) *stats = local;
    if (local.query_beats_both > 0) {
        log_info("original query outranked both rewrites in " +
                 std::to_string(local.query_beats_both) + "/" + std::to_string(total) +
                 " iterations (pairs still use the two rewrites)");
    }
    return dataset;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TrainResult train_toy_policy(const DpoDataset& dataset, const DpoConfig& cfg) {
    if (dataset.pairs.empty()) throw Error("train_toy_policy: empty dataset");
    if (cfg.batch_size == 0) throw Error("train_toy_policy: batch size must be positive");

    ToyPolicy policy(cfg.feature_dim, cfg.beta);
    std::vector<ToyPolicy::PairFeatures> features;
    features.reserve(dataset.pairs.size());
    for (const auto& pair : dataset.pairs) features.push_back(policy.pair_features(pair));

    TrainResult result{std::move(policy), {}};
    std::vector<size_t> order(dataset.pairs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<double> weights = result.policy.weights();
    std::vector<double> batch_grad(cfg.feature_dim, 0.0);

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng epoch_rng(derive_seed(cfg.seed, epoch));
        epoch_rng.shuffle(order);

        double epoch_loss_sum = 0.0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            size_t end = std::min(order.size(), start + cfg.batch_size);
            std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
            for (size_t k = start; k < end; ++k) {
                auto grad = result.policy.loss_gradient(features[order[k]]);
                if (!std::isfinite(grad.loss)) {
                    throw Error("train_toy_policy: non-finite loss at epoch " +
                                std::to_string(epoch + 1) + ", pair " +
                                std::to_string(order[k]) + " (z=" + std::to_string(grad.z) + ")");
                }
                epoch_loss_sum += grad.loss;
                for (size_t d = 0; d < cfg.feature_dim; ++d) batch_grad[d] += grad.weights_grad[d];
            }
            double scale = cfg.learning_rate / static_cast<double>(end - start);
            weights = result.policy.weights();
            for (size_t d = 0; d < cfg.feature_dim; ++d) weights[d] -= scale * batch_grad[d];
            result.policy.set_weights(weights);
        }
        result.epoch_losses.push_back(epoch_loss_sum / static_cast<double>(order.size()));
    }
    return result;
}

PolicyEval evaluate_policy(const ToyPolicy& policy, const DpoDataset& dataset) {
    if (dataset.pairs.empty()) throw Error("evaluate_policy: empty dataset");
    PolicyEval out;
    for (const auto& pair : dataset.pairs) {
        double z = dpo_z(policy.loss_input(pair));
        out.mean_z += z;
        out.mean_loss += dpo_loss(z);
        out.mean_sigmoid_z += sigmoid(z);
    }
    double n = static_cast<double>(dataset.pairs.size());
    out.mean_z /= n;
    out.mean_loss /= n;
    out.mean_sigmoid_z /= n;
    return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string serialize_dataset(const DpoDataset& dataset) {
    std::string out;
    for (const auto& pair : dataset.pairs) {
        json meta{{"query_id", pair.meta.query_id},
                  {"iteration", pair.meta.iteration},
                  {"seed", pair.meta.seed},
                  {"score_query", pair.meta.score_query},
                  {"score_chosen", pair.meta.score_chosen},
                  {"score_rejected", pair.meta.score_rejected},
                  {"chosen_source", pair.meta.chosen_source},
                  {"rejected_source", pair.meta.rejected_source}};
        json obj{{"prompt", pair.prompt},
                 {"chosen", pair.chosen},
                 {"rejected", pair.rejected},
                 {"meta", meta}};
        out += obj.dump();
        out += '\n';
    }
    return out;
}

void export_dataset(const DpoDataset& dataset, const std::string& path) {
    write_file(path, serialize_dataset(dataset));
}

DpoDataset parse_dataset(const std::string& content, const std::string& origin) {
    DpoDataset dataset;
    size_t line_no = 0;
    size_t pos = 0;
    while (pos <= content.size()) {
        size_t eol = content.find('\n', pos);
        size_t len = (eol == std::string::npos ? content.size() : eol) - pos;
        ++line_no;
        std::string_view line(content.data() + pos, len);
        if (!trim(line).empty()) {
            json obj;
            try {
                obj = json::parse(line);
            } catch (const json::parse_error& e) {
                throw Error(origin + ":" + std::to_string(line_no) + ": malformed JSON: " +
                            e.what());
            }
            try {
                DpoPair pair;
                pair.prompt = obj.at("prompt").get<std::string>();
                pair.chosen = obj.at("chosen").get<std::string>();
                pair.rejected = obj.at("rejected").get<std::string>();
                const json& meta = obj.at("meta");
                pair.meta.query_id = meta.at("query_id").get<std::string>();
                pair.meta.iteration = meta.at("iteration").get<size_t>();
                pair.meta.seed = meta.at("seed").get<uint64_t>();
                pair.meta.score_query = meta.at("score_query").get<double>();
                pair.meta.score_chosen = meta.at("score_chosen").get<double>();
                pair.meta.score_rejected = meta.at("score_rejected").get<double>();
                pair.meta.chosen_source = meta.at("chosen_source").get<std::string>();
                pair.meta.rejected_source = meta.at("rejected_source").get<std::string>();
                if (!(pair.meta.score_chosen > pair.meta.score_rejected)) {
                    throw Error("chosen score must exceed rejected score");
                }
                dataset.pairs.push_back(std::move(pair));
            } catch (const json::exception& e) {
                throw Error(origin + ":" + std::to_string(line_no) + ": bad pair record: " +
                            e.what());
            } catch (const Error& e) {
                throw Error(origin + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
        if (eol == std::string::npos) break;
        pos = eol + 1;
    }
    return dataset;
}

DpoDataset import_dataset(const std::string& path) {
    return parse_dataset(read_file(path), path);
}

} // namespace mtr
