#pragma once

#include "novelty/ingest.hpp"
#include "novelty/providers.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Two-stage hybrid retrieval: BM25 + dense recall with min-max score fusion,
// then reranking down to the final context per query.
namespace novelty::retrieval {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

// Okapi BM25 over chunk terms (text::terms). Query terms are deduplicated.
// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), which stays positive.
class SparseIndex {
public:
  static SparseIndex build(const std::vector<ingest::Chunk> &chunks, Bm25Params params = {});

  std::vector<double> score_all(std::string_view query) const;
  double idf(const std::string &term) const;
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string> &chunk_ids() const { return ids_; }
  const Bm25Params &params() const { return params_; }
  double average_length() const { return avgdl_; }

  nlohmann::json to_json() const;
  static SparseIndex from_json(const nlohmann::json &j);

private:
  struct Posting {
    std::uint32_t chunk;
    std::uint32_t tf;
  };

  Bm25Params params_;
  std::vector<std::string> ids_;
  std::vector<std::uint32_t> lengths_;
  double avgdl_ = 0.0;
  std::map<std::string, std::vector<Posting>, std::less<>> postings_;
};

// Exact cosine search over unit-normalised rows (linear scan).
class DenseIndex {
public:
  DenseIndex() = default;
  DenseIndex(std::vector<std::string> ids, std::size_t dim, std::vector<float> rows);

  static DenseIndex build(const std::vector<ingest::Chunk> &chunks, EmbeddingProvider &provider);

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string> &chunk_ids() const { return ids_; }
  std::span<const float> row(std::size_t i) const;

  std::vector<double> cosine_all(std::span<const float> query) const;

  // dense.json header {dim, count, ids} and dense.bin (float32, row-major).
  void save(const std::filesystem::path &dir) const;
  static DenseIndex load(const std::filesystem::path &dir);

private:
  std::vector<std::string> ids_;
  std::size_t dim_ = 0;
  std::vector<float> rows_;
};

struct ScoredChunk {
  std::size_t index = 0; // position in the retriever's chunk list
  std::string chunk_id;
  double sparse_score = 0.0;
  double dense_score = 0.0;
  std::optional<double> fused_score;
  std::optional<double> rerank_score;
};

// Pure fusion step. Pathway pools are the top n_recall chunks by raw score
// (sparse pool restricted to `sparse_matched`); each pool is min-max
// normalised (a constant pool normalises to 1), chunks outside a pool score 0
// on that pathway, and fused = weight * sparse + (1 - weight) * dense over the
// union. Sorted by fused desc, then by the weighted pathway rank, then index;
// truncated to n_recall.
std::vector<ScoredChunk> fuse_scores(std::span<const double> sparse_raw,
                                     std::span<const double> dense_raw,
                                     const std::vector<bool> &sparse_matched, std::size_t n_recall,
                                     double weight);

struct ContextChunk {
  ScoredChunk score;
  ingest::Chunk chunk;
};

enum class RankSource { reranker, fused_fallback };

struct RetrievedContext {
  std::string query;
  std::vector<ContextChunk> chunks; // rerank_score desc, unique chunk ids
  RankSource ranked_by = RankSource::reranker;
};

struct RetrievalParams {
  std::size_t n_recall = 50;
  double weight = 0.5;
  std::size_t k_final = 7;
  bool rerank_fallback = true;
  std::size_t max_parallel = 4;
};

// Scores every candidate with the provider and keeps the top k_final. When
// the provider is unavailable and fallback is enabled the fused order is kept
// and ranked_by records it.
RetrievedContext rerank(std::string_view query, std::vector<ContextChunk> candidates,
                        RerankProvider *provider, std::size_t k_final, bool fallback = true);

// Deduplicated union across per-query contexts, keeping each chunk's best
// rerank score; ordered by that score desc (first appearance breaks ties) and
// capped at `cap`.
std::vector<ContextChunk> union_contexts(const std::vector<RetrievedContext> &contexts,
                                         std::size_t cap);

class Retriever {
public:
  // An empty chunk list yields empty contexts for every query.
  Retriever(std::vector<ingest::Chunk> chunks, std::optional<SparseIndex> sparse,
            std::optional<DenseIndex> dense, EmbeddingProvider &embedder,
            RerankProvider *reranker, RetrievalParams params);

  static Retriever build(std::vector<ingest::Chunk> chunks, EmbeddingProvider &embedder,
                         RerankProvider *reranker, RetrievalParams params);

  std::vector<ScoredChunk> hybrid_recall(std::string_view query) const;
  RetrievedContext retrieve(std::string_view query) const;
  std::vector<RetrievedContext> retrieve_for_queries(const std::vector<std::string> &queries) const;

  const std::vector<ingest::Chunk> &chunks() const { return chunks_; }
  const RetrievalParams &params() const { return params_; }

private:
  std::vector<ingest::Chunk> chunks_;
  std::optional<SparseIndex> sparse_;
  std::optional<DenseIndex> dense_;
  EmbeddingProvider *embedder_;
  RerankProvider *reranker_;
  RetrievalParams params_;
};

// Deterministic local embedder: signed feature hashing of terms into `dim`
// buckets, unit-normalised. Used for offline runs.
class HashingEmbedder final : public EmbeddingProvider {
public:
  explicit HashingEmbedder(std::size_t dim = 256) : dim_(dim) {}
  std::vector<std::vector<float>> embed(const std::vector<std::string> &texts) override;

private:
  std::size_t dim_;
};

// Local reranker: fraction of distinct query terms present in the passage.
class LexicalReranker final : public RerankProvider {
public:
  std::vector<double> score(std::string_view query, const std::vector<std::string> &passages) override;
};

} // namespace novelty::retrieval
