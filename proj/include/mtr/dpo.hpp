#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtr/corpus.hpp"
#include "mtr/qscore.hpp"
#include "mtr/retrieval.hpp"
#include "mtr/rewriter.hpp"

namespace mtr {

/// Provenance stamped on every preference pair: the Eq-style position-score
/// totals of the original query and both rewrites, plus the RNG stream that
/// produced the pair. score_chosen > score_rejected holds strictly.
struct DpoMeta {
    std::string query_id;
    size_t iteration = 0;
    uint64_t seed = 0;
    double score_query = 0.0;
    double score_chosen = 0.0;
    double score_rejected = 0.0;
    std::string chosen_source;
    std::string rejected_source;

    bool operator==(const DpoMeta&) const = default;
};

/// One preference record. The prompt holds the query in context (the tool
/// subset the rewriter saw); the completions are always the two rewrites —
/// the original query never appears as a completion.
struct DpoPair {
    std::string prompt;
    std::string chosen;
    std::string rejected;
    DpoMeta meta;

    bool operator==(const DpoPair&) const = default;
};

struct DpoProvenance {
    std::string config_summary;
    uint64_t corpus_digest = 0;
};

/// Pair order is fixed by (sample index, iteration), never by completion
/// time. Provenance is in-memory metadata; the file format carries pairs only.
struct DpoDataset {
    std::vector<DpoPair> pairs;
    DpoProvenance provenance;
};

struct DpoConfig {
    double beta = 0.1;
    size_t generations_per_sample = 100; // m
    double learning_rate = 0.1;          // toy-policy scale; full LLM fine-tuning sits near 5e-6
    size_t epochs = 3;
    size_t batch_size = 32;
    uint64_t seed = 0;
    size_t feature_dim = 4096; // hashed feature space of the toy policy
};

// ---------------------------------------------------------------------------
// Loss mathematics
// ---------------------------------------------------------------------------

/// Numerically stable logistic function.
double sigmoid(double z);

struct DpoLossInput {
    double logp_theta_chosen = 0.0;
    double logp_ref_chosen = 0.0;
    double logp_theta_rejected = 0.0;
    double logp_ref_rejected = 0.0;
    double beta = 0.1;
};

/// z = beta * [(log pi_theta(ch) - log pi_ref(ch))
///             - (log pi_theta(rej) - log pi_ref(rej))]
double dpo_z(const DpoLossInput& input);

/// -ln(sigmoid(z)), computed as softplus(-z). The partition factor of the
/// underlying reward never appears: it cancels in the ratio and the math here
/// only ever sees log-ratios.
double dpo_loss(double z);

// ---------------------------------------------------------------------------
// Toy policy: linear logits over hashed (prompt, completion) features with a
// softmax over the pair's own two candidates. The DPO loss depends only on
// log-ratios of the listed completions, so a 2-way normalization is exact.
// ---------------------------------------------------------------------------

/// Sorted sparse feature vector (index, signed count).
struct SparseFeatures {
    std::vector<std::pair<uint32_t, double>> entries;
};

class ToyPolicy {
public:
    /// Reference weights freeze to a copy of the initial weights and never
    /// change afterwards. Default initialization is all zeros: a uniform
    /// distribution over any candidate pair.
    ToyPolicy(size_t feature_dim, double beta);
    ToyPolicy(size_t feature_dim, double beta, std::vector<double> initial_weights);

    size_t feature_dim() const { return dim_; }
    double beta() const { return beta_; }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& reference_weights() const { return ref_weights_; }
    void set_weights(std::vector<double> weights);

    /// Completion unigrams plus (prompt token, completion token) cross
    /// features, signed-hashed into the feature space.
    SparseFeatures features(const std::string& prompt, const std::string& completion) const;

    struct PairFeatures {
        SparseFeatures chosen;
        SparseFeatures rejected;
    };
    PairFeatures pair_features(const DpoPair& pair) const;

    /// The four log-probabilities of the pair under current and reference
    /// weights (softmax over {chosen, rejected}).
    DpoLossInput loss_input(const PairFeatures& features) const;
    DpoLossInput loss_input(const DpoPair& pair) const;

    struct Gradient {
        double z = 0.0;
        double loss = 0.0;
        double dloss_dz = 0.0;
        std::vector<double> weights_grad; // dense, feature_dim entries
    };
    Gradient loss_gradient(const PairFeatures& features) const;

private:
    size_t dim_;
    double beta_;
    std::vector<double> weights_;
    std::vector<double> ref_weights_;
};

/// Chain rule through dL/dz = -sigmoid(-z) and the softmax log-probabilities.
ToyPolicy::Gradient dpo_loss_grad(const DpoLossInput& input, const ToyPolicy& policy,
                                  const DpoPair& pair);

// ---------------------------------------------------------------------------
// Pair generation
// ---------------------------------------------------------------------------

struct PairGenDeps {
    const ToolCorpus* corpus = nullptr;
    const Retriever* retriever = nullptr;
    /// Rewriters for the two independent draws; usually the same object.
    const Rewriter* first_rewriter = nullptr;
    const Rewriter* second_rewriter = nullptr;
    ScoreConfig score_cfg;
    RewriteConfig rewrite_cfg;
};

enum class PairSkip { None, TiedScores, RewriterFailed };

struct PairOutcome {
    std::optional<DpoPair> pair;
    PairSkip skip = PairSkip::None;
    /// Diagnostics for iterations where the original query outranks (or
    /// trails) both rewrites; the two rewrites are paired regardless.
    bool query_beats_both = false;
    bool query_below_both = false;
};

/// One generation iteration for one annotated sample: sample a tool subset,
/// draw two rewrites, rank all three of {q, rewrite_1, rewrite_2}, score them
/// against the golden set, and pair the two rewrites as chosen/rejected.
/// Equal rewrite scores yield no preference signal and skip the iteration.
PairOutcome generate_pair(const QuerySample& sample, const PairGenDeps& deps, size_t iteration,
                          uint64_t stream_seed);

struct DatasetGenStats {
    size_t emitted = 0;
    size_t skipped_tied = 0;
    size_t skipped_failed = 0;
    size_t query_beats_both = 0;
    size_t query_below_both = 0;
};

/// m iterations per training sample. Iteration i of sample j runs on RNG
/// stream derive(seed, j*m + i), so output is identical for any worker count.
DpoDataset generate_dataset(const std::vector<QuerySample>& train_samples,
                            const PairGenDeps& deps, size_t m, uint64_t seed, size_t workers = 1,
                            DatasetGenStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Training and serialization
// ---------------------------------------------------------------------------

struct TrainResult {
    ToyPolicy policy;
    std::vector<double> epoch_losses; // mean training loss per epoch
};

/// Deterministic mini-batch gradient descent. Aborts with a diagnostic if the
/// loss stops being finite.
TrainResult train_toy_policy(const DpoDataset& dataset, const DpoConfig& cfg);

struct PolicyEval {
    double mean_loss = 0.0;
    double mean_z = 0.0;
    double mean_sigmoid_z = 0.0;
};
PolicyEval evaluate_policy(const ToyPolicy& policy, const DpoDataset& dataset);

std::string serialize_dataset(const DpoDataset& dataset);
void export_dataset(const DpoDataset& dataset, const std::string& path);
DpoDataset parse_dataset(const std::string& content, const std::string& origin);
DpoDataset import_dataset(const std::string& path);

} // namespace mtr
