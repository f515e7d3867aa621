#include "mtr/qscore.hpp"

#include <algorithm>
#include <cmath>

#include "mtr/errors.hpp"

namespace mtr {

double position_score(size_t idx, size_t n) {
    if (idx < 1) throw Error("position_score: idx must be >= 1");
    if (n < 1) throw Error("position_score: n must be >= 1");
    double rank = static_cast<double>(idx);
    if (idx <= n) {
        return 1.0 / std::log2(rank + 1.1);
    }
    double cutoff = static_cast<double>(n);
    return -(rank - cutoff) / std::log2(rank / cutoff + 1.0);
}

CandidateScore candidate_score(const Ranking& ranking, const std::set<std::string>& golden,
                               const ScoreConfig& cfg) {
    CandidateScore out;
    out.candidate_text = ranking.query();
    for (const auto& id : golden) {
        size_t rank = ranking.rank_of(id); // throws on missing golden id
        out.golden_ranks.emplace(id, rank);
    }
    // Sum in golden-id order (the map's order) so the result is independent
    // of the caller's enumeration order.
    for (const auto& [id, rank] : out.golden_ranks) {
        out.total += position_score(rank, cfg.n);
    }
    return out;
}

std::vector<CandidateScore> order_candidates(std::vector<CandidateScore> scored) {
    if (scored.empty()) throw Error("order_candidates: need at least one candidate");
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.total != b.total) return a.total > b.total;
        return a.candidate_text < b.candidate_text;
    });
    return scored;
}

} // namespace mtr
