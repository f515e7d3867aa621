#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtr/corpus.hpp"

namespace mtr {

/// Full ordering of every tool in the corpus for one query. Scores are
/// non-increasing; ties break by ascending tool id so rankings are
/// reproducible regardless of corpus file order.
class Ranking {
public:
    struct Entry {
        std::string id;
        double score = 0.0;
    };

    Ranking(std::string query, std::vector<Entry> entries);

    const std::string& query() const { return query_; }
    const std::vector<Entry>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }

    /// 1-based rank of a tool id.
    size_t rank_of(const std::string& id) const;
    bool contains(const std::string& id) const { return rank_index_.count(id) > 0; }

private:
    std::string query_;
    std::vector<Entry> entries_;
    std::unordered_map<std::string, size_t> rank_index_;
};

/// Assemble a Ranking from per-ordinal scores: sort by (score desc, id asc).
Ranking make_ranking(const ToolCorpus& corpus, const std::string& query,
                     const std::vector<double>& scores);

class Retriever {
public:
    virtual ~Retriever() = default;
    virtual Ranking rank_full(const std::string& query) const = 0;
    virtual std::string describe() const = 0;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Okapi BM25 over tool descriptions, tokenized with the corpus rule.
/// IDF uses the non-negative variant ln((M - df + 0.5)/(df + 0.5) + 1).
/// Immutable after build; safe for concurrent queries.
class Bm25Index : public Retriever {
public:
    Bm25Index(const ToolCorpus& corpus, Bm25Params params = {});

    double score(const std::string& query, const std::string& tool_id) const;
    Ranking rank_full(const std::string& query) const override;
    std::string describe() const override { return "bm25"; }

    const Bm25Params& params() const { return params_; }
    double average_doc_length() const { return avg_doc_length_; }
    size_t doc_length(size_t ordinal) const { return doc_lengths_.at(ordinal); }
    /// Number of documents containing the term (0 for unseen terms).
    size_t document_frequency(const std::string& term) const;
    const ToolCorpus& corpus() const { return *corpus_; }

private:
    std::vector<double> score_all(const std::string& query) const;
    double term_score(const std::string& term, size_t ordinal) const;

    const ToolCorpus* corpus_;
    Bm25Params params_;
    // term -> (ordinal -> term frequency); doubles as the document-frequency table
    std::unordered_map<std::string, std::unordered_map<size_t, size_t>> postings_;
    std::vector<size_t> doc_lengths_;
    double avg_doc_length_ = 0.0;
};

} // namespace mtr
