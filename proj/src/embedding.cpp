#include "mtr/embedding.hpp"

#include <cmath>

#include "mtr/errors.hpp"
#include "mtr/text.hpp"
#include "mtr/worker_pool.hpp"

namespace mtr {

EmbeddingVector EmbeddingVector::normalized(std::vector<double> raw) {
    double sq = 0.0;
    for (double v : raw) sq += v * v;
    EmbeddingVector out;
    out.values = std::move(raw);
    if (sq > 0.0) {
        double inv = 1.0 / std::sqrt(sq);
        for (double& v : out.values) v *= inv;
        out.norm = 1.0;
    } else {
        out.norm = 0.0;
    }
    return out;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.is_zero() || b.is_zero()) return 0.0;
    if (a.values.size() != b.values.size()) {
        throw Error("cosine: dimension mismatch (" + std::to_string(a.values.size()) + " vs " +
                    std::to_string(b.values.size()) + ")");
    }
    double dot = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
    return dot;
}

std::vector<EmbeddingVector> EmbeddingProvider::embed_tools(
    const std::vector<ToolRecord>& records) const {
    std::vector<EmbeddingVector> out;
    out.reserve(records.size());
    for (const auto& rec : records) out.push_back(embed_tool(rec));
    return out;
}

HashedEmbeddingProvider::HashedEmbeddingProvider(size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw Error("hashed provider: dimension must be positive");
}

EmbeddingVector HashedEmbeddingProvider::embed(const std::string& text) const {
    std::vector<double> acc(dimension_, 0.0);
    for (const auto& token : tokenize(text)) {
        uint64_t h = fnv1a64(token);
        size_t bucket = static_cast<size_t>(h % dimension_);
        acc[bucket] += (h >> 63) ? -1.0 : 1.0;
    }
    return EmbeddingVector::normalized(std::move(acc));
}

FileEmbeddingProvider::FileEmbeddingProvider(const std::string& path) : path_(path) {
    std::string content = read_file(path);
    size_t line_no = 0;
    size_t pos = 0;
    while (pos <= content.size()) {
        size_t eol = content.find('\n', pos);
        size_t len = (eol == std::string::npos ? content.size() : eol) - pos;
        ++line_no;
        std::string_view line(content.data() + pos, len);
        if (!trim(line).empty()) {
            nlohmann::json obj;
            try {
                obj = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                throw Error(path + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
            }
            if (!obj.contains("id") || !obj["id"].is_string() || !obj.contains("vector") ||
                !obj["vector"].is_array()) {
                throw Error(path + ":" + std::to_string(line_no) +
                            ": expected {\"id\": str, \"vector\": [float...]}");
            }
            std::string id = obj["id"].get<std::string>();
            std::vector<double> raw = obj["vector"].get<std::vector<double>>();
            if (dimension_ == 0) {
                dimension_ = raw.size();
                if (dimension_ == 0) {
                    throw Error(path + ":" + std::to_string(line_no) + ": empty vector");
                }
            } else if (raw.size() != dimension_) {
                throw Error(path + ":" + std::to_string(line_no) + ": dimension mismatch (" +
                            std::to_string(raw.size()) + " vs " + std::to_string(dimension_) + ")");
            }
            if (!table_.emplace(id, EmbeddingVector::normalized(std::move(raw))).second) {
                throw Error(path + ":" + std::to_string(line_no) + ": duplicate embedding key " + id);
            }
        }
        if (eol == std::string::npos) break;
        pos = eol + 1;
    }
    if (table_.empty()) throw Error(path + ": no embeddings loaded");
}

EmbeddingVector FileEmbeddingProvider::embed(const std::string& key) const {
    auto it = table_.find(key);
    if (it == table_.end()) {
        throw Error("embedding not precomputed in " + path_ + ": \"" + key + "\"");
    }
    return it->second;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(HttpEndpoint endpoint, std::string model,
                                                 size_t batch_size)
    : endpoint_(std::move(endpoint)), model_(std::move(model)),
      batch_size_(batch_size == 0 ? 1 : batch_size) {}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::embed_batch(
    const std::vector<std::string>& texts) const {
    nlohmann::json body{{"model", model_}, {"input", texts}};
    nlohmann::json res = post_json(endpoint_, body);
    if (!res.contains("data") || !res["data"].is_array() || res["data"].size() != texts.size()) {
        throw RemoteError("embedding endpoint returned malformed data array");
    }
    std::vector<EmbeddingVector> out(texts.size());
    for (const auto& item : res["data"]) {
        if (!item.contains("index") || !item.contains("embedding") ||
            !item["embedding"].is_array()) {
            throw RemoteError("embedding endpoint returned malformed data item");
        }
        size_t idx = item["index"].get<size_t>();
        if (idx >= texts.size()) throw RemoteError("embedding endpoint returned bad index");
        std::vector<double> raw = item["embedding"].get<std::vector<double>>();
        if (dimension_ == 0) dimension_ = raw.size();
        if (raw.size() != dimension_ || raw.empty()) {
            throw RemoteError("embedding dimension mismatch: got " + std::to_string(raw.size()) +
                              ", expected " + std::to_string(dimension_));
        }
        out[idx] = EmbeddingVector::normalized(std::move(raw));
    }
    return out;
}

EmbeddingVector RemoteEmbeddingProvider::embed(const std::string& text) const {
    return embed_batch({text}).front();
}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::embed_tools(
    const std::vector<ToolRecord>& records) const {
    std::vector<EmbeddingVector> out(records.size());
    for (size_t start = 0; start < records.size(); start += batch_size_) {
        size_t end = std::min(records.size(), start + batch_size_);
        std::vector<std::string> texts;
        texts.reserve(end - start);
        for (size_t i = start; i < end; ++i) texts.push_back(records[i].description);
        auto vecs = embed_batch(texts);
        for (size_t i = start; i < end; ++i) out[i] = std::move(vecs[i - start]);
    }
    return out;
}

DenseIndex::DenseIndex(const ToolCorpus& corpus, std::shared_ptr<const EmbeddingProvider> provider,
                       size_t workers)
    : corpus_(&corpus), provider_(std::move(provider)) {
    if (corpus.size() == 0) throw Error("dense index: empty corpus");
    if (workers <= 1 || dynamic_cast<const RemoteEmbeddingProvider*>(provider_.get())) {
        // Remote providers batch internally; keep their request stream serial.
        vectors_ = provider_->embed_tools(corpus.tools());
    } else {
        vectors_.resize(corpus.size());
        parallel_for(corpus.size(), workers,
                     [&](size_t i) { vectors_[i] = provider_->embed_tool(corpus.at(i)); });
    }
    for (const auto& v : vectors_) {
        if (v.is_zero()) continue;
        if (dimension_ == 0) dimension_ = v.values.size();
        if (v.values.size() != dimension_) throw Error("dense index: mixed embedding dimensions");
    }
}

Ranking DenseIndex::rank_full(const std::string& query) const {
    EmbeddingVector q = provider_->embed(query);
    std::vector<double> scores(corpus_->size(), 0.0);
    for (size_t i = 0; i < corpus_->size(); ++i) {
        const auto& v = vectors_[i];
        if (q.is_zero() || v.is_zero()) {
            scores[i] = 0.0;
        } else {
            scores[i] = cosine(q, v);
        }
    }
    return make_ranking(*corpus_, query, scores);
}

} // namespace mtr
