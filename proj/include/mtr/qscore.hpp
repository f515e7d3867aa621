#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "mtr/retrieval.hpp"

namespace mtr {

struct ScoreConfig {
    size_t n = 10; // rank cutoff separating reward from penalty
};

/// Modified-DCG position score for a golden tool's 1-based rank:
///   idx <= n:  1 / log2(idx + 1.1)
///   idx >  n:  -(idx - n) / log2(idx/n + 1)
/// Positive and decaying inside the cutoff, increasingly negative outside.
double position_score(size_t idx, size_t n);

/// A query candidate (the original query or a rewrite) scored by where its
/// retrieval run places each golden tool. total is the sum of position
/// scores over the golden set.
struct CandidateScore {
    std::string candidate_text;
    std::map<std::string, size_t> golden_ranks;
    double total = 0.0;
};

CandidateScore candidate_score(const Ranking& ranking, const std::set<std::string>& golden,
                               const ScoreConfig& cfg);

/// Descending by total; ties break by ascending candidate text.
std::vector<CandidateScore> order_candidates(std::vector<CandidateScore> scored);

} // namespace mtr
