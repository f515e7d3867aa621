#include "mtr/retrieval.hpp"

#include <algorithm>
#include <cmath>

#include "mtr/errors.hpp"
#include "mtr/text.hpp"

namespace mtr {

Ranking::Ranking(std::string query, std::vector<Entry> entries)
    : query_(std::move(query)), entries_(std::move(entries)) {
    rank_index_.reserve(entries_.size());
    for (size_t i = 0; i < entries_.size(); ++i) {
        rank_index_.emplace(entries_[i].id, i + 1);
    }
}

size_t Ranking::rank_of(const std::string& id) const {
    auto it = rank_index_.find(id);
    if (it == rank_index_.end()) throw Error("tool id not present in ranking: " + id);
    return it->second;
}

Ranking make_ranking(const ToolCorpus& corpus, const std::string& query,
                     const std::vector<double>& scores) {
    std::vector<Ranking::Entry> entries;
    entries.reserve(corpus.size());
    for (size_t i = 0; i < corpus.size(); ++i) {
        entries.push_back({corpus.at(i).id, scores[i]});
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    return Ranking(query, std::move(entries));
}

Bm25Index::Bm25Index(const ToolCorpus& corpus, Bm25Params params)
    : corpus_(&corpus), params_(params) {
    if (corpus.size() == 0) throw Error("bm25: empty corpus");
    if (params_.k1 < 0.0) throw Error("bm25: k1 must be non-negative");
    if (params_.b < 0.0 || params_.b > 1.0) throw Error("bm25: b must lie in [0, 1]");

    doc_lengths_.resize(corpus.size());
    size_t total = 0;
    for (size_t i = 0; i < corpus.size(); ++i) {
        auto tokens = tokenize(corpus.at(i).description);
        doc_lengths_[i] = tokens.size();
        total += tokens.size();
        for (auto& tok : tokens) {
            ++postings_[tok][i];
        }
    }
    avg_doc_length_ = static_cast<double>(total) / static_cast<double>(corpus.size());
}

size_t Bm25Index::document_frequency(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
}

double Bm25Index::term_score(const std::string& term, size_t ordinal) const {
    auto post_it = postings_.find(term);
    if (post_it == postings_.end()) return 0.0;
    auto tf_it = post_it->second.find(ordinal);
    if (tf_it == post_it->second.end()) return 0.0;

    double M = static_cast<double>(corpus_->size());
    double df = static_cast<double>(post_it->second.size());
    double tf = static_cast<double>(tf_it->second);
    double len = static_cast<double>(doc_lengths_[ordinal]);

    double idf = std::log((M - df + 0.5) / (df + 0.5) + 1.0);
    double denom = tf + params_.k1 * (1.0 - params_.b + params_.b * len / avg_doc_length_);
    return idf * tf * (params_.k1 + 1.0) / denom;
}

double Bm25Index::score(const std::string& query, const std::string& tool_id) const {
    auto ordinal = corpus_->ordinal_of(tool_id);
    if (!ordinal) throw Error("bm25: unknown tool id: " + tool_id);
    double total = 0.0;
    // Each query token occurrence contributes; a term repeated in the query
    // counts as many times as it appears.
    for (const auto& term : tokenize(query)) {
        total += term_score(term, *ordinal);
    }
    return total;
}

std::vector<double> Bm25Index::score_all(const std::string& query) const {
    std::vector<double> scores(corpus_->size(), 0.0);
    for (const auto& term : tokenize(query)) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        for (const auto& [ordinal, _] : it->second) {
            scores[ordinal] += term_score(term, ordinal);
        }
    }
    return scores;
}

Ranking Bm25Index::rank_full(const std::string& query) const {
    return make_ranking(*corpus_, query, score_all(query));
}

} // namespace mtr
