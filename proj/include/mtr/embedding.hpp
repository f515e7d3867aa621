#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mtr/corpus.hpp"
#include "mtr/http_client.hpp"
#include "mtr/retrieval.hpp"

namespace mtr {

/// L2-normalized embedding. norm is 1 for any nonzero input vector and 0 for
/// the all-zero vector, which is defined to score 0 against everything.
struct EmbeddingVector {
    std::vector<double> values;
    double norm = 0.0;

    bool is_zero() const { return norm == 0.0; }

    static EmbeddingVector normalized(std::vector<double> raw);
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual EmbeddingVector embed(const std::string& text) const = 0;
    /// Key used when indexing a corpus record. The file-backed provider looks
    /// records up by id; text-driven providers embed the description.
    virtual EmbeddingVector embed_tool(const ToolRecord& record) const {
        return embed(record.description);
    }
    /// Batch hook so remote providers can amortize requests.
    virtual std::vector<EmbeddingVector> embed_tools(const std::vector<ToolRecord>& records) const;

    virtual size_t dimension() const = 0;
    virtual std::string describe() const = 0;
};

/// Deterministic offline embedding: signed feature hashing of the token
/// multiset. bucket = fnv1a64(token) mod dimension, sign +1 when the hash's
/// top bit is clear, -1 otherwise, then L2 normalization.
class HashedEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HashedEmbeddingProvider(size_t dimension = 256);

    EmbeddingVector embed(const std::string& text) const override;
    size_t dimension() const override { return dimension_; }
    std::string describe() const override { return "hashed"; }

private:
    size_t dimension_;
};

/// Precomputed embeddings from a JSONL file ({"id": str, "vector": [...]}).
/// Lookups by tool id for index builds and by exact text for queries; keys
/// not present in the file are errors.
class FileEmbeddingProvider : public EmbeddingProvider {
public:
    explicit FileEmbeddingProvider(const std::string& path);

    EmbeddingVector embed(const std::string& key) const override;
    EmbeddingVector embed_tool(const ToolRecord& record) const override { return embed(record.id); }
    size_t dimension() const override { return dimension_; }
    std::string describe() const override { return "file"; }

private:
    std::unordered_map<std::string, EmbeddingVector> table_;
    size_t dimension_ = 0;
    std::string path_;
};

/// Remote embedding service speaking
///   POST {"model": str, "input": [str...]}
///   ->   {"data": [{"index": int, "embedding": [float...]}...]}
class RemoteEmbeddingProvider : public EmbeddingProvider {
public:
    RemoteEmbeddingProvider(HttpEndpoint endpoint, std::string model, size_t batch_size = 32);

    EmbeddingVector embed(const std::string& text) const override;
    std::vector<EmbeddingVector> embed_tools(const std::vector<ToolRecord>& records) const override;
    /// Dimension is learned from the first response; 0 until then.
    size_t dimension() const override { return dimension_; }
    std::string describe() const override { return "remote:" + model_; }

private:
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) const;

    HttpEndpoint endpoint_;
    std::string model_;
    size_t batch_size_;
    mutable size_t dimension_ = 0;
};

/// Dense retriever: cosine similarity between the query embedding and each
/// tool's embedding (dot product of normalized vectors).
class DenseIndex : public Retriever {
public:
    DenseIndex(const ToolCorpus& corpus, std::shared_ptr<const EmbeddingProvider> provider,
               size_t workers = 1);

    Ranking rank_full(const std::string& query) const override;
    std::string describe() const override { return "dense/" + provider_->describe(); }

    size_t dimension() const { return dimension_; }
    const EmbeddingVector& vector_for(size_t ordinal) const { return vectors_.at(ordinal); }

private:
    const ToolCorpus* corpus_;
    std::shared_ptr<const EmbeddingProvider> provider_;
    std::vector<EmbeddingVector> vectors_;
    size_t dimension_ = 0;
};

} // namespace mtr
