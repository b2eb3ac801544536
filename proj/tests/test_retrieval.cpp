#include "novelty/gateway.hpp"
#include "novelty/retrieval.hpp"
#include "novelty/text.hpp"

#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace novelty;
using namespace novelty::retrieval;
using test_support::error_kind_of;

namespace {

ingest::Chunk chunk(std::size_t i, std::string text, std::string doc = "D") {
  ingest::Chunk c;
  c.chunk_id = doc + "#" + std::to_string(i);
  c.doc_id = std::move(doc);
  c.ordinal = i;
  c.text = std::move(text);
  c.token_count = text::terms(c.text).size();
  return c;
}

// Independent Okapi BM25 straight from the formula.
double okapi(const std::vector<ingest::Chunk> &chunks, std::size_t d, const std::string &query) {
  const double k1 = 1.2, b = 0.75;
  std::vector<std::vector<std::string>> docs;
  double total = 0;
  for (const auto &c : chunks) {
    docs.push_back(text::terms(c.text));
    total += static_cast<double>(docs.back().size());
  }
  const double avgdl = total / static_cast<double>(docs.size());
  auto q = text::terms(query);
  std::sort(q.begin(), q.end());
  q.erase(std::unique(q.begin(), q.end()), q.end());
  double score = 0;
  for (const auto &t : q) {
    double df = 0;
    for (const auto &doc : docs) {
      df += std::find(doc.begin(), doc.end(), t) != doc.end() ? 1 : 0;
    }
    const double tf = static_cast<double>(std::count(docs[d].begin(), docs[d].end(), t));
    const double n = static_cast<double>(docs.size());
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    const double len = static_cast<double>(docs[d].size());
    score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avgdl));
  }
  return score;
}

// Returns a fixed vector per text; unknown texts map to a default vector.
class FixedEmbedder final : public EmbeddingProvider {
public:
  std::map<std::string, std::vector<float>> table;
  std::vector<float> fallback{1.0f, 0.0f, 0.0f};
  std::size_t calls = 0;

  std::vector<std::vector<float>> embed(const std::vector<std::string> &texts) override {
    ++calls;
    std::vector<std::vector<float>> out;
    for (const auto &t : texts) {
      const auto it = table.find(t);
      out.push_back(it == table.end() ? fallback : it->second);
    }
    return out;
  }
};

class SubstringReranker final : public RerankProvider {
public:
  std::vector<double> score(std::string_view query, const std::vector<std::string> &passages) override {
    std::vector<double> out;
    for (const auto &p : passages) {
      out.push_back(p.find(query) != std::string::npos ? 1.0 : 0.0);
    }
    return out;
  }
};

class DownReranker final : public RerankProvider {
public:
  std::vector<double> score(std::string_view, const std::vector<std::string> &) override {
    fail(ErrorKind::ProviderUnavailable, "reranker down");
  }
};

std::vector<std::size_t> order_of(const std::vector<ScoredChunk> &v) {
  std::vector<std::size_t> out;
  for (const auto &s : v) {
    out.push_back(s.index);
  }
  return out;
}

std::vector<std::size_t> brute_order(const std::vector<double> &scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

const std::vector<ingest::Chunk> &five_chunks() {
  static const std::vector<ingest::Chunk> chunks{
      chunk(0, "Neural graph ODE models evolve node states in continuous time."),
      chunk(1, "A graph attention network attends over graph neighbours."),
      chunk(2, "Latent ODE models handle irregular time series with an ODE solver."),
      chunk(3, "Transformers rely on attention alone."),
      chunk(4, "Graph ODE graph ODE repeated terms stress term frequency saturation."),
  };
  return chunks;
}

} // namespace

TEST_CASE("BM25 equals a hand evaluation of the Okapi formula") {
  const auto idx = SparseIndex::build(five_chunks());
  const auto scores = idx.score_all("graph ODE");
  REQUIRE(scores.size() == 5);
  for (std::size_t d = 0; d < 5; ++d) {
    CHECK(std::fabs(scores[d] - okapi(five_chunks(), d, "graph ODE")) < 1e-9);
  }
  CHECK(scores[3] == 0.0);
  // Repeated query terms count once.
  const auto twice = idx.score_all("graph graph ODE");
  for (std::size_t d = 0; d < 5; ++d) {
    CHECK(twice[d] == doctest::Approx(scores[d]).epsilon(1e-12));
  }
}

TEST_CASE("BM25 single chunk and unknown terms") {
  const auto one = SparseIndex::build({chunk(0, "solitary")});
  CHECK(one.score_all("solitary")[0] > 0.0);
  const auto idx = SparseIndex::build(five_chunks());
  for (double s : idx.score_all("zebra quokka")) {
    CHECK(s == 0.0);
  }
  CHECK(error_kind_of([] { SparseIndex::build({}); }) == ErrorKind::EmptyCorpus);
}

TEST_CASE("sparse index JSON round-trip preserves scores") {
  const auto idx = SparseIndex::build(five_chunks());
  const auto back = SparseIndex::from_json(nlohmann::json::parse(idx.to_json().dump()));
  CHECK(back.score_all("attention graph") == idx.score_all("attention graph"));
  CHECK(back.chunk_ids() == idx.chunk_ids());
}

TEST_CASE("dense index: determinism, identity and brute-force order") {
  HashingEmbedder emb(64);
  const auto v1 = emb.embed({"graph attention"});
  const auto v2 = emb.embed({"graph attention"});
  CHECK(v1 == v2);

  FixedEmbedder fixed;
  std::vector<ingest::Chunk> chunks;
  auto rng = test_support::rng(17);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (std::size_t i = 0; i < 20; ++i) {
    chunks.push_back(chunk(i, "c" + std::to_string(i)));
    fixed.table[chunks.back().text] = {u(rng), u(rng), u(rng), u(rng)};
  }
  const auto dense = DenseIndex::build(chunks, fixed);
  // A chunk's own vector as the query: cosine 1, ranked first.
  std::vector<float> q = fixed.table["c7"];
  gateway::normalize(q);
  const auto cos = dense.cosine_all(q);
  CHECK(cos[7] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(brute_order(cos).front() == 7);

  // Oracle: cosine from the raw vectors.
  const std::vector<float> query{0.3f, -0.2f, 0.9f, 0.1f};
  std::vector<double> expected;
  for (const auto &c : chunks) {
    const auto &v = fixed.table[c.text];
    double dot = 0, nv = 0, nq = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      dot += v[k] * query[k];
      nv += v[k] * v[k];
      nq += query[k] * query[k];
    }
    expected.push_back(dot / std::sqrt(nv * nq));
  }
  std::vector<float> qn = query;
  gateway::normalize(qn);
  const auto got = dense.cosine_all(qn);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-5));
  }
  const auto a = brute_order(got);
  const auto b = brute_order(expected);
  CHECK(std::vector<std::size_t>(a.begin(), a.begin() + 10) == std::vector<std::size_t>(b.begin(), b.begin() + 10));

  CHECK(error_kind_of([&] { dense.cosine_all(std::vector<float>{1.0f, 0.0f}); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("dense index save/load round-trip") {
  test_support::TempDir tmp;
  HashingEmbedder emb(32);
  const auto dense = DenseIndex::build(five_chunks(), emb);
  dense.save(tmp.path());
  const auto back = DenseIndex::load(tmp.path());
  CHECK(back.dim() == 32);
  CHECK(back.chunk_ids() == dense.chunk_ids());
  for (std::size_t i = 0; i < dense.size(); ++i) {
    CHECK(std::equal(back.row(i).begin(), back.row(i).end(), dense.row(i).begin()));
  }
}

TEST_CASE("fusion with weight 1 reproduces the BM25 order") {
  auto rng = test_support::rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    std::vector<double> sparse(n), dense(n);
    std::vector<bool> matched(n);
    for (std::size_t i = 0; i < n; ++i) {
      matched[i] = rng() % 3 != 0;
      sparse[i] = matched[i] ? static_cast<double>(1 + rng() % 20) / 4.0 : 0.0;
      dense[i] = static_cast<double>(rng() % 100) / 100.0;
    }
    CHECK(order_of(fuse_scores(sparse, dense, matched, n, 1.0)) == brute_order(sparse));
    CHECK(order_of(fuse_scores(sparse, dense, matched, n, 0.0)) == brute_order(dense));
  }
}

TEST_CASE("fusion with weight 0.5 matches the hand-computed table") {
  const std::vector<double> sparse{3, 0, 1, 2, 0, 5, 0, 4, 1, 0};
  const std::vector<double> dense{0.1, 0.9, 0.5, 0.3, 0.2, 0.8, 0.4, 0.6, 0.7, 0.0};
  std::vector<bool> matched;
  for (double s : sparse) {
    matched.push_back(s > 0);
  }
  const auto fused = fuse_scores(sparse, dense, matched, 10, 0.5);
  // Sparse min-max over the matched pool [1, 5], dense over [0, 0.9].
  const std::vector<std::pair<std::size_t, double>> table{
      {5, 0.944444}, {7, 0.708333}, {1, 0.5},      {8, 0.388889}, {0, 0.305556},
      {3, 0.291667}, {2, 0.277778}, {6, 0.222222}, {4, 0.111111}, {9, 0.0}};
  REQUIRE(fused.size() == table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    CHECK(fused[i].index == table[i].first);
    CHECK(*fused[i].fused_score == doctest::Approx(table[i].second).epsilon(1e-5));
  }
}

TEST_CASE("fusion edge cases") {
  const std::vector<double> s{2, 2, 2};
  const std::vector<double> d{0.5, 0.5, 0.5};
  const auto f = fuse_scores(s, d, {true, true, true}, 2, 0.5);
  REQUIRE(f.size() == 2);
  CHECK(*f[0].fused_score == 1.0); // constant pools normalise to 1
  CHECK(order_of(f) == std::vector<std::size_t>{0, 1});
  CHECK(error_kind_of([&] { fuse_scores(s, d, {true, true, true}, 2, 1.5); }) == ErrorKind::InvalidInput);
  CHECK(error_kind_of([&] { fuse_scores(s, std::vector<double>{0.5}, {true, true, true}, 2, 0.5); }) == ErrorKind::InvalidInput);
}

TEST_CASE("rerank keeps at most k_final chunks") {
  std::vector<ingest::Chunk> chunks;
  for (std::size_t i = 0; i < 60; ++i) {
    chunks.push_back(chunk(i, "shared term number " + std::to_string(i)));
  }
  HashingEmbedder emb;
  LexicalReranker lex;
  const auto r = Retriever::build(chunks, emb, &lex, RetrievalParams{});
  CHECK(r.hybrid_recall("shared term").size() == 50);
  CHECK(r.retrieve("shared term").chunks.size() == 7);

  const auto small = Retriever::build({chunk(0, "a b"), chunk(1, "b c"), chunk(2, "c d")}, emb, &lex, {});
  CHECK(small.retrieve("b").chunks.size() == 3);
}

TEST_CASE("substring reranker produces the expected order") {
  std::vector<ContextChunk> cands;
  const std::vector<std::string> texts{"graph ODE solver", "attention only", "a graph ODE model", "ODE graph",
                                       "graph ODE"};
  for (std::size_t i = 0; i < texts.size(); ++i) {
    ContextChunk c;
    c.chunk = chunk(i, texts[i]);
    c.score.index = i;
    c.score.chunk_id = c.chunk.chunk_id;
    c.score.fused_score = 1.0 - 0.1 * static_cast<double>(i);
    cands.push_back(c);
  }
  SubstringReranker sub;
  const auto ctx = rerank("graph ODE", cands, &sub, 7);
  std::vector<std::size_t> got;
  for (const auto &c : ctx.chunks) {
    got.push_back(c.score.index);
  }
  // Matches first in fused order, then the rest in fused order.
  CHECK(got == std::vector<std::size_t>{0, 2, 4, 1, 3});
  CHECK(ctx.ranked_by == RankSource::reranker);
}

TEST_CASE("rerank falls back to fused order when the reranker is down") {
  std::vector<ContextChunk> cands;
  for (std::size_t i = 0; i < 4; ++i) {
    ContextChunk c;
    c.chunk = chunk(i, "t" + std::to_string(i));
    c.score.index = i;
    c.score.fused_score = static_cast<double>(i);
    cands.push_back(c);
  }
  DownReranker down;
  const auto ctx = rerank("q", cands, &down, 2, true);
  CHECK(ctx.ranked_by == RankSource::fused_fallback);
  REQUIRE(ctx.chunks.size() == 2);
  CHECK(ctx.chunks[0].score.index == 3);
  CHECK(*ctx.chunks[0].score.rerank_score == 3.0);
  CHECK(error_kind_of([&] { rerank("q", cands, &down, 2, false); }) == ErrorKind::ProviderUnavailable);
  CHECK(rerank("q", cands, nullptr, 2, true).ranked_by == RankSource::fused_fallback);
}

TEST_CASE("union of identical queries stays within k_final") {
  std::vector<ingest::Chunk> chunks;
  for (std::size_t i = 0; i < 30; ++i) {
    chunks.push_back(chunk(i, "expert routing gate " + std::to_string(i)));
  }
  HashingEmbedder emb;
  LexicalReranker lex;
  const auto r = Retriever::build(chunks, emb, &lex, {});
  const auto ctxs = r.retrieve_for_queries(std::vector<std::string>(6, "expert routing"));
  const auto merged = union_contexts(ctxs, 42);
  CHECK(merged.size() <= 7);
  std::set<std::string> ids;
  for (const auto &c : merged) {
    ids.insert(c.chunk.chunk_id);
  }
  CHECK(ids.size() == merged.size());
}

TEST_CASE("union of disjoint topics concatenates the contexts") {
  std::vector<ingest::Chunk> chunks;
  const std::vector<std::string> alpha{"alpha", "apricot", "anchor", "amber", "atlas"};
  const std::vector<std::string> beta{"bravo", "basalt", "beacon", "bishop", "birch"};
  for (std::size_t i = 0; i < 10; ++i) {
    chunks.push_back(chunk(i, "alpha apricot " + alpha[i % 5] + " " + std::to_string(i), "A"));
    chunks.push_back(chunk(i, "bravo basalt " + beta[i % 5] + " " + std::to_string(i), "B"));
  }
  HashingEmbedder emb;
  LexicalReranker lex;
  const auto r = Retriever::build(chunks, emb, &lex, {});
  const auto ctxs = r.retrieve_for_queries({"alpha apricot", "bravo basalt"});
  const auto merged = union_contexts(ctxs, 42);
  REQUIRE(merged.size() == 14);
  for (std::size_t i = 0; i < 14; ++i) {
    CHECK(merged[i].chunk.doc_id == (i < 7 ? "A" : "B"));
  }
  CHECK(union_contexts(ctxs, 5).size() == 5);
}

TEST_CASE("empty corpus yields empty contexts") {
  HashingEmbedder emb;
  const Retriever r({}, std::nullopt, std::nullopt, emb, nullptr, {});
  const auto ctxs = r.retrieve_for_queries({"anything", "else"});
  REQUIRE(ctxs.size() == 2);
  CHECK(ctxs[0].chunks.empty());
  CHECK(union_contexts(ctxs, 42).empty());
  CHECK(error_kind_of([&] { r.retrieve_for_queries({}); }) == ErrorKind::InvalidInput);
}

TEST_CASE("hashing embedder output is unit length") {
  HashingEmbedder emb(128);
  for (const auto &v : emb.embed({"sparse expert routing", "x", "graph graph graph"})) {
    double n = 0;
    for (float x : v) {
      n += static_cast<double>(x) * x;
    }
    CHECK(n == doctest::Approx(1.0).epsilon(1e-6));
  }
}
