#include "novelty/retrieval.hpp"

#include "novelty/error.hpp"
#include "novelty/gateway.hpp"
#include "novelty/parallel.hpp"
#include "novelty/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>

namespace novelty::retrieval {

using nlohmann::json;

// --- sparse ---------------------------------------------------------------------

SparseIndex SparseIndex::build(const std::vector<ingest::Chunk> &chunks, Bm25Params params) {
  if (chunks.empty()) {
    fail(ErrorKind::EmptyCorpus, "cannot build a sparse index over zero chunks");
  }
  SparseIndex index;
  index.params_ = params;
  double total = 0.0;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    index.ids_.push_back(chunks[i].chunk_id);
    const auto terms = text::terms(chunks[i].text);
    index.lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
    total += static_cast<double>(terms.size());
    std::map<std::string, std::uint32_t> tf;
    for (const auto &t : terms) {
      ++tf[t];
    }
    for (const auto &[term, count] : tf) {
      index.postings_[term].push_back({static_cast<std::uint32_t>(i), count});
    }
  }
  index.avgdl_ = total / static_cast<double>(chunks.size());
  return index;
}

double SparseIndex::idf(const std::string &term) const {
  const auto it = postings_.find(term);
  const double df = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
  const double n = static_cast<double>(ids_.size());
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::vector<double> SparseIndex::score_all(std::string_view query) const {
  std::vector<double> scores(ids_.size(), 0.0);
  auto terms = text::terms(query);
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  const double k1 = params_.k1;
  const double b = params_.b;
  for (const auto &term : terms) {
    const auto it = postings_.find(term);
    if (it == postings_.end()) {
      continue;
    }
    const double w = idf(term);
    for (const Posting &p : it->second) {
      const double tf = p.tf;
      const double norm = avgdl_ > 0.0 ? static_cast<double>(lengths_[p.chunk]) / avgdl_ : 0.0;
      scores[p.chunk] += w * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm));
    }
  }
  return scores;
}

json SparseIndex::to_json() const {
  json j;
  j["k1"] = params_.k1;
  j["b"] = params_.b;
  j["avgdl"] = avgdl_;
  j["ids"] = ids_;
  j["lengths"] = lengths_;
  json postings = json::object();
  for (const auto &[term, list] : postings_) {
    json arr = json::array();
    for (const auto &p : list) {
      arr.push_back({p.chunk, p.tf});
    }
    postings[term] = std::move(arr);
  }
  j["postings"] = std::move(postings);
  return j;
}

SparseIndex SparseIndex::from_json(const json &j) {
  SparseIndex index;
  try {
    index.params_.k1 = j.at("k1").get<double>();
    index.params_.b = j.at("b").get<double>();
    index.avgdl_ = j.at("avgdl").get<double>();
    index.ids_ = j.at("ids").get<std::vector<std::string>>();
    index.lengths_ = j.at("lengths").get<std::vector<std::uint32_t>>();
    for (const auto &[term, arr] : j.at("postings").items()) {
      auto &list = index.postings_[term];
      for (const auto &p : arr) {
        list.push_back({p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>()});
      }
    }
  } catch (const json::exception &e) {
    fail(ErrorKind::InvalidInput, std::string("corrupt sparse index: ") + e.what());
  }
  return index;
}

// --- dense ----------------------------------------------------------------------

DenseIndex::DenseIndex(std::vector<std::string> ids, std::size_t dim, std::vector<float> rows)
    : ids_(std::move(ids)), dim_(dim), rows_(std::move(rows)) {
  if (rows_.size() != ids_.size() * dim_) {
    fail(ErrorKind::DimensionMismatch, "dense matrix size does not match ids x dim");
  }
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    std::vector<float> r(rows_.begin() + static_cast<std::ptrdiff_t>(i * dim_),
                         rows_.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim_));
    gateway::normalize(r);
    std::copy(r.begin(), r.end(), rows_.begin() + static_cast<std::ptrdiff_t>(i * dim_));
  }
}

DenseIndex DenseIndex::build(const std::vector<ingest::Chunk> &chunks, EmbeddingProvider &provider) {
  if (chunks.empty()) {
    fail(ErrorKind::EmptyCorpus, "cannot build a dense index over zero chunks");
  }
  std::vector<std::string> texts;
  std::vector<std::string> ids;
  texts.reserve(chunks.size());
  for (const auto &c : chunks) {
    texts.push_back(c.text);
    ids.push_back(c.chunk_id);
  }
  const auto vectors = provider.embed(texts);
  if (vectors.size() != chunks.size()) {
    fail(ErrorKind::DimensionMismatch, "embedding provider returned " +
                                           std::to_string(vectors.size()) + " vectors for " +
                                           std::to_string(chunks.size()) + " chunks");
  }
  const std::size_t dim = vectors.front().size();
  std::vector<float> rows;
  rows.reserve(dim * vectors.size());
  for (const auto &v : vectors) {
    if (v.size() != dim || dim == 0) {
      fail(ErrorKind::DimensionMismatch, "inconsistent embedding dimensions");
    }
    rows.insert(rows.end(), v.begin(), v.end());
  }
  return DenseIndex(std::move(ids), dim, std::move(rows));
}

std::span<const float> DenseIndex::row(std::size_t i) const {
  return std::span<const float>(rows_).subspan(i * dim_, dim_);
}

std::vector<double> DenseIndex::cosine_all(std::span<const float> query) const {
  if (query.size() != dim_) {
    fail(ErrorKind::DimensionMismatch, "query dimension " + std::to_string(query.size()) +
                                           " != index dimension " + std::to_string(dim_));
  }
  std::vector<float> q(query.begin(), query.end());
  gateway::normalize(q);
  std::vector<double> out(ids_.size(), 0.0);
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const auto r = row(i);
    double dot = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) {
      dot += static_cast<double>(r[d]) * q[d];
    }
    out[i] = std::clamp(dot, -1.0, 1.0);
  }
  return out;
}

void DenseIndex::save(const std::filesystem::path &dir) const {
  json header;
  header["dim"] = dim_;
  header["count"] = ids_.size();
  header["ids"] = ids_;
  text::write_file(dir / "dense.json", header.dump(2) + "\n");
  std::string bytes(rows_.size() * sizeof(float), '\0');
  std::memcpy(bytes.data(), rows_.data(), bytes.size());
  text::write_file(dir / "dense.bin", bytes);
}

DenseIndex DenseIndex::load(const std::filesystem::path &dir) {
  std::vector<std::string> ids;
  std::size_t dim = 0;
  std::size_t count = 0;
  try {
    const json header = json::parse(text::read_file(dir / "dense.json"));
    dim = header.at("dim").get<std::size_t>();
    count = header.at("count").get<std::size_t>();
    ids = header.at("ids").get<std::vector<std::string>>();
  } catch (const json::exception &e) {
    fail(ErrorKind::InvalidInput, std::string("corrupt dense header: ") + e.what());
  }
  const std::string bytes = text::read_file(dir / "dense.bin");
  if (ids.size() != count || bytes.size() != count * dim * sizeof(float)) {
    fail(ErrorKind::DimensionMismatch, "dense.bin does not match its header");
  }
  std::vector<float> rows(count * dim);
  std::memcpy(rows.data(), bytes.data(), bytes.size());
  return DenseIndex(std::move(ids), dim, std::move(rows));
}

// --- fusion -------------------------------------------------------------------------

namespace {

std::vector<std::size_t> top_indices(std::span<const double> scores, std::size_t n,
                                     const std::vector<bool> *eligible) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (eligible == nullptr || (*eligible)[i]) {
      idx.push_back(i);
    }
  }
  const auto better = [&](std::size_t a, std::size_t b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  };
  if (idx.size() > n) {
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(), better);
    idx.resize(n);
  } else {
    std::sort(idx.begin(), idx.end(), better);
  }
  return idx;
}

// Competition rank: number of entries with a strictly greater score.
std::vector<std::size_t> competition_ranks(std::span<const double> scores) {
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  std::vector<std::size_t> ranks(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    ranks[i] = static_cast<std::size_t>(
        std::lower_bound(sorted.begin(), sorted.end(), scores[i], std::greater<>()) - sorted.begin());
  }
  return ranks;
}

std::unordered_map<std::size_t, double> min_max(std::span<const double> scores,
                                                const std::vector<std::size_t> &pool) {
  std::unordered_map<std::size_t, double> out;
  if (pool.empty()) {
    return out;
  }
  double lo = scores[pool.front()];
  double hi = lo;
  for (std::size_t i : pool) {
    lo = std::min(lo, scores[i]);
    hi = std::max(hi, scores[i]);
  }
  for (std::size_t i : pool) {
    out[i] = hi > lo ? (scores[i] - lo) / (hi - lo) : 1.0;
  }
  return out;
}

} // namespace

std::vector<ScoredChunk> fuse_scores(std::span<const double> sparse_raw,
                                     std::span<const double> dense_raw,
                                     const std::vector<bool> &sparse_matched, std::size_t n_recall,
                                     double weight) {
  if (sparse_raw.size() != dense_raw.size() || sparse_matched.size() != sparse_raw.size()) {
    fail(ErrorKind::InvalidInput, "pathway score vectors differ in length");
  }
  if (weight < 0.0 || weight > 1.0) {
    fail(ErrorKind::InvalidInput, "fusion weight must lie in [0, 1]");
  }
  const auto sparse_pool = top_indices(sparse_raw, n_recall, &sparse_matched);
  const auto dense_pool = top_indices(dense_raw, n_recall, nullptr);
  const auto sparse_norm = min_max(sparse_raw, sparse_pool);
  const auto dense_norm = min_max(dense_raw, dense_pool);
  const auto sparse_rank = competition_ranks(sparse_raw);
  const auto dense_rank = competition_ranks(dense_raw);

  std::set<std::size_t> candidates(sparse_pool.begin(), sparse_pool.end());
  candidates.insert(dense_pool.begin(), dense_pool.end());

  struct Row {
    ScoredChunk chunk;
    double rank_key;
  };
  std::vector<Row> rows;
  rows.reserve(candidates.size());
  for (std::size_t i : candidates) {
    const auto s = sparse_norm.find(i);
    const auto d = dense_norm.find(i);
    const double ns = s == sparse_norm.end() ? 0.0 : s->second;
    const double nd = d == dense_norm.end() ? 0.0 : d->second;
    ScoredChunk sc;
    sc.index = i;
    sc.sparse_score = sparse_raw[i];
    sc.dense_score = dense_raw[i];
    sc.fused_score = weight * ns + (1.0 - weight) * nd;
    rows.push_back({std::move(sc), weight * static_cast<double>(sparse_rank[i]) +
                                       (1.0 - weight) * static_cast<double>(dense_rank[i])});
  }
  std::sort(rows.begin(), rows.end(), [](const Row &a, const Row &b) {
    if (*a.chunk.fused_score != *b.chunk.fused_score) {
      return *a.chunk.fused_score > *b.chunk.fused_score;
    }
    if (a.rank_key != b.rank_key) {
      return a.rank_key < b.rank_key;
    }
    return a.chunk.index < b.chunk.index;
  });
  std::vector<ScoredChunk> out;
  for (auto &r : rows) {
    if (out.size() == n_recall) {
      break;
    }
    out.push_back(std::move(r.chunk));
  }
  return out;
}

// --- rerank -----------------------------------------------------------------------------

RetrievedContext rerank(std::string_view query, std::vector<ContextChunk> candidates,
                        RerankProvider *provider, std::size_t k_final, bool fallback) {
  RetrievedContext ctx;
  ctx.query = std::string(query);
  if (candidates.empty()) {
    return ctx;
  }
  std::vector<std::string> passages;
  passages.reserve(candidates.size());
  for (const auto &c : candidates) {
    passages.push_back(c.chunk.text);
  }
  std::vector<double> scores;
  try {
    if (provider == nullptr) {
      fail(ErrorKind::ProviderUnavailable, "no reranker configured");
    }
    scores = provider->score(query, passages);
    if (scores.size() != candidates.size()) {
      fail(ErrorKind::ProviderUnavailable, "reranker returned a misaligned score list");
    }
    ctx.ranked_by = RankSource::reranker;
  } catch (const Error &e) {
    if (e.kind() != ErrorKind::ProviderUnavailable || !fallback) {
      throw;
    }
    scores.clear();
    for (const auto &c : candidates) {
      scores.push_back(c.score.fused_score.value_or(0.0));
    }
    ctx.ranked_by = RankSource::fused_fallback;
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    candidates[i].score.rerank_score = scores[i];
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const ContextChunk &a, const ContextChunk &b) {
    if (*a.score.rerank_score != *b.score.rerank_score) {
      return *a.score.rerank_score > *b.score.rerank_score;
    }
    const double fa = a.score.fused_score.value_or(0.0);
    const double fb = b.score.fused_score.value_or(0.0);
    if (fa != fb) {
      return fa > fb;
    }
    return a.score.index < b.score.index;
  });
  std::set<std::string> seen;
  for (auto &c : candidates) {
    if (ctx.chunks.size() == k_final) {
      break;
    }
    if (seen.insert(c.chunk.chunk_id).second) {
      ctx.chunks.push_back(std::move(c));
    }
  }
  return ctx;
}

std::vector<ContextChunk> union_contexts(const std::vector<RetrievedContext> &contexts,
                                         std::size_t cap) {
  std::vector<ContextChunk> merged;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto &ctx : contexts) {
    for (const auto &c : ctx.chunks) {
      const auto it = slot.find(c.chunk.chunk_id);
      if (it == slot.end()) {
        slot.emplace(c.chunk.chunk_id, merged.size());
        merged.push_back(c);
      } else if (c.score.rerank_score.value_or(0.0) >
                 merged[it->second].score.rerank_score.value_or(0.0)) {
        merged[it->second] = c;
      }
    }
  }
  std::stable_sort(merged.begin(), merged.end(), [](const ContextChunk &a, const ContextChunk &b) {
    return a.score.rerank_score.value_or(0.0) > b.score.rerank_score.value_or(0.0);
  });
  if (merged.size() > cap) {
    merged.resize(cap);
  }
  return merged;
}

// --- retriever -------------------------------------------------------------------------

Retriever::Retriever(std::vector<ingest::Chunk> chunks, std::optional<SparseIndex> sparse,
                     std::optional<DenseIndex> dense, EmbeddingProvider &embedder,
                     RerankProvider *reranker, RetrievalParams params)
    : chunks_(std::move(chunks)), sparse_(std::move(sparse)), dense_(std::move(dense)),
      embedder_(&embedder), reranker_(reranker), params_(params) {
  if (!chunks_.empty()) {
    if (!sparse_ || !dense_ || sparse_->size() != chunks_.size() || dense_->size() != chunks_.size()) {
      fail(ErrorKind::InvalidInput, "indexes were not built over the retriever's chunk set");
    }
    for (std::size_t i = 0; i < chunks_.size(); ++i) {
      if (sparse_->chunk_ids()[i] != chunks_[i].chunk_id ||
          dense_->chunk_ids()[i] != chunks_[i].chunk_id) {
        fail(ErrorKind::InvalidInput, "index chunk order differs from chunk store");
      }
    }
  }
}

Retriever Retriever::build(std::vector<ingest::Chunk> chunks, EmbeddingProvider &embedder,
                           RerankProvider *reranker, RetrievalParams params) {
  if (chunks.empty()) {
    return Retriever({}, std::nullopt, std::nullopt, embedder, reranker, params);
  }
  auto sparse = SparseIndex::build(chunks);
  auto dense = DenseIndex::build(chunks, embedder);
  return Retriever(std::move(chunks), std::move(sparse), std::move(dense), embedder, reranker,
                   params);
}

std::vector<ScoredChunk> Retriever::hybrid_recall(std::string_view query) const {
  if (chunks_.empty()) {
    return {};
  }
  const auto sparse = sparse_->score_all(query);
  const auto qv = embedder_->embed({std::string(query)});
  if (qv.size() != 1) {
    fail(ErrorKind::DimensionMismatch, "embedding provider returned no query vector");
  }
  const auto dense = dense_->cosine_all(qv.front());
  std::vector<bool> matched(sparse.size());
  for (std::size_t i = 0; i < sparse.size(); ++i) {
    matched[i] = sparse[i] > 0.0;
  }
  auto fused = fuse_scores(sparse, dense, matched, params_.n_recall, params_.weight);
  for (auto &f : fused) {
    f.chunk_id = chunks_[f.index].chunk_id;
  }
  return fused;
}

RetrievedContext Retriever::retrieve(std::string_view query) const {
  std::vector<ContextChunk> candidates;
  for (auto &sc : hybrid_recall(query)) {
    const std::size_t i = sc.index;
    candidates.push_back({std::move(sc), chunks_[i]});
  }
  return rerank(query, std::move(candidates), reranker_, params_.k_final, params_.rerank_fallback);
}

std::vector<RetrievedContext> Retriever::retrieve_for_queries(const std::vector<std::string> &queries) const {
  if (queries.empty()) {
    fail(ErrorKind::InvalidInput, "at least one query is required");
  }
  std::vector<RetrievedContext> out(queries.size());
  parallel_for(queries.size(), params_.max_parallel,
               [&](std::size_t i) { out[i] = retrieve(queries[i]); });
  return out;
}

// --- local providers ----------------------------------------------------------------------

std::vector<std::vector<float>> HashingEmbedder::embed(const std::vector<std::string> &texts) {
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const auto &t : texts) {
    std::vector<float> v(dim_, 0.0F);
    for (const auto &term : text::terms(t)) {
      const std::uint64_t h = text::fnv1a64(term);
      v[h % dim_] += (h >> 63) != 0U ? -1.0F : 1.0F;
    }
    gateway::normalize(v);
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<double> LexicalReranker::score(std::string_view query,
                                           const std::vector<std::string> &passages) {
  auto q = text::terms(query);
  std::sort(q.begin(), q.end());
  q.erase(std::unique(q.begin(), q.end()), q.end());
  std::vector<double> out;
  out.reserve(passages.size());
  for (const auto &p : passages) {
    if (q.empty()) {
      out.push_back(0.0);
      continue;
    }
    auto terms = text::terms(p);
    std::sort(terms.begin(), terms.end());
    std::size_t hits = 0;
    for (const auto &t : q) {
      hits += std::binary_search(terms.begin(), terms.end(), t) ? 1 : 0;
    }
    out.push_back(static_cast<double>(hits) / static_cast<double>(q.size()));
  }
  return out;
}

} // namespace novelty::retrieval
