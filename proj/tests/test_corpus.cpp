#include "novelty/corpus.hpp"
#include "novelty/ingest.hpp"
#include "novelty/text.hpp"

#include "support.hpp"

#include <algorithm>
#include <set>

using namespace novelty;
using namespace novelty::corpus;
using test_support::error_kind_of;

namespace {

PaperMeta paper(std::string id, std::optional<Date> date = std::nullopt) {
  PaperMeta m;
  m.id = id;
  m.title = "Title " + id;
  m.publication_date = date;
  return m;
}

// Adjacency-list provider for synthetic citation graphs.
class GraphProvider final : public ScholarlyProvider {
public:
  std::map<std::string, std::vector<std::string>> refs;

  PaperMeta resolve(std::string_view id) override { return paper(std::string(id)); }
  std::vector<PaperMeta> references(const PaperMeta &p) override {
    std::vector<PaperMeta> out;
    for (const auto &r : refs[p.id]) {
      out.push_back(paper(r));
    }
    return out;
  }
};

std::vector<std::string> ids(const std::vector<PaperMeta> &v) {
  std::vector<std::string> out;
  for (const auto &m : v) {
    out.push_back(m.id);
  }
  return out;
}

Date date(int y, int m = 0, int d = 0) { return Date{y, m, d}; }

} // namespace

TEST_CASE("date parsing keeps partial precision and orders it first") {
  CHECK(Date::parse("2023") == date(2023));
  CHECK(Date::parse("2023-05") == date(2023, 5));
  CHECK(Date::parse("2023-05-17") == date(2023, 5, 17));
  CHECK_FALSE(Date::parse("May 2023").has_value());
  CHECK_FALSE(Date::parse("2023-13-01").has_value());
  CHECK(date(2023) < date(2023, 1, 1));
  CHECK(Date::parse("2023-05")->to_string() == "2023-05");
}

TEST_CASE("reference set of a paper without references is empty") {
  GraphProvider g;
  const auto set = fetch_reference_set(paper("T"), g);
  CHECK(set.first_order.empty());
  CHECK(set.second_order.empty());
}

TEST_CASE("two-order reference set counts first-order citers") {
  GraphProvider g;
  g.refs = {{"T", {"A", "B"}}, {"A", {"C", "D"}}, {"B", {"C"}}};
  const auto set = fetch_reference_set(paper("T"), g);
  CHECK(ids(set.first_order) == std::vector<std::string>{"A", "B"});
  REQUIRE(ids(set.second_order) == std::vector<std::string>{"C", "D"});
  CHECK(set.second_order[0].cited_by_first_order == 2);
  CHECK(set.second_order[1].cited_by_first_order == 1);
  CHECK(set.second_order[0].order == Order::second);
}

TEST_CASE("the target never appears in its own reference set") {
  GraphProvider g;
  g.refs = {{"T", {"A"}}, {"A", {"T"}}};
  const auto set = fetch_reference_set(paper("T"), g);
  CHECK(ids(set.first_order) == std::vector<std::string>{"A"});
  CHECK(set.second_order.empty());
}

TEST_CASE("property: reference set matches a brute-force traversal") {
  auto rng = test_support::rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 15);
    GraphProvider g;
    const auto name = [](int i) { return i == 0 ? std::string("T") : "P" + std::to_string(i); };
    for (int i = 0; i < n; ++i) {
      const int deg = static_cast<int>(rng() % 5);
      for (int k = 0; k < deg; ++k) {
        g.refs[name(i)].push_back(name(static_cast<int>(rng() % n)));
      }
    }
    const auto set = fetch_reference_set(paper("T"), g);

    // Oracle: distinct direct references in order, minus the target; second
    // order = distinct references of those, minus target and first order.
    std::vector<std::string> first;
    for (const auto &r : g.refs["T"]) {
      if (r != "T" && std::find(first.begin(), first.end(), r) == first.end()) {
        first.push_back(r);
      }
    }
    std::vector<std::string> second;
    std::map<std::string, std::set<std::string>> citers;
    for (const auto &f : first) {
      for (const auto &r : g.refs[f]) {
        if (r == "T" || std::find(first.begin(), first.end(), r) != first.end()) {
          continue;
        }
        if (citers[r].empty()) {
          second.push_back(r);
        }
        citers[r].insert(f);
      }
    }
    REQUIRE(ids(set.first_order) == first);
    REQUIRE(ids(set.second_order) == second);
    for (const auto &s : set.second_order) {
      CHECK(s.cited_by_first_order == static_cast<int>(citers[s.id].size()));
    }
  }
}

TEST_CASE("second-order ranking: citation count, then recency") {
  std::vector<PaperMeta> first{paper("F1"), paper("F2")};
  auto x = paper("X", date(2023));
  x.cited_by_first_order = 3;
  auto y = paper("Y", date(2024));
  y.cited_by_first_order = 3;
  auto z = paper("Z", date(2020));
  z.cited_by_first_order = 5;
  const auto m = rank_and_truncate(paper("T"), first, {x, y, z}, first.size() + 2);
  CHECK(ids(m.entries) == std::vector<std::string>{"F1", "F2", "Z", "Y"});
  CHECK(m.capacity == 4);
  CHECK(m.target_id == "T");
}

TEST_CASE("no second-order papers leaves the first order unchanged") {
  std::vector<PaperMeta> first{paper("B"), paper("A")};
  const auto m = rank_and_truncate(paper("T"), first, {}, 200);
  CHECK(ids(m.entries) == std::vector<std::string>{"B", "A"});
}

TEST_CASE("capacity below the first-order count is rejected") {
  std::vector<PaperMeta> first{paper("A"), paper("B"), paper("C")};
  CHECK(error_kind_of([&] { rank_and_truncate(paper("T"), first, {}, 2); }) == ErrorKind::CapacityTooSmall);
}

TEST_CASE("default capacity bounds the manifest size") {
  std::vector<PaperMeta> first;
  std::vector<PaperMeta> second;
  for (int i = 0; i < 30; ++i) {
    first.push_back(paper("F" + std::to_string(i)));
  }
  for (int i = 0; i < 500; ++i) {
    auto p = paper("S" + std::to_string(i), date(1990 + i % 30));
    p.cited_by_first_order = i % 7;
    second.push_back(p);
  }
  const auto m = rank_and_truncate(paper("T"), first, second, kDefaultCapacity);
  CHECK(m.entries.size() == 200);
}

TEST_CASE("undated second-order papers rank after dated ones at equal count") {
  auto a = paper("A");
  a.cited_by_first_order = 1;
  auto b = paper("B", date(1999));
  b.cited_by_first_order = 1;
  CHECK(ranks_before(b, a));
  CHECK_FALSE(ranks_before(a, b));
  CHECK_FALSE(ranks_before(a, a));
}

TEST_CASE("offline provider resolves by id and by title") {
  OfflineScholarlyProvider p(test_support::fixture_dir() / "offline");
  CHECK(p.resolve("T1").title == "Streaming Graph Routing with Sparse Expert Mixtures");
  CHECK(p.resolve("streaming graph routing with sparse EXPERT mixtures").id == "T1");
  CHECK(error_kind_of([&] { p.resolve("no such paper"); }) == ErrorKind::TargetNotFound);
  CHECK(ids(p.references(p.resolve("T1"))).size() == 6);
}

TEST_CASE("fixture corpus resolves every text present and flags the missing ones") {
  OfflineScholarlyProvider p(test_support::fixture_dir() / "offline");
  const auto target = p.resolve("T1");
  auto refs = fetch_reference_set(target, p);
  const auto manifest = rank_and_truncate(target, refs.first_order, refs.second_order, 200);
  DirectoryTextSource source(test_support::fixture_dir() / "offline" / "texts");
  const auto docs = resolve_full_texts(manifest, source, 3);
  REQUIRE(docs.size() == manifest.entries.size());
  for (const auto &d : docs) {
    const bool missing = d.meta.id == "F6" || d.meta.id == "S6";
    CHECK(d.ingest_status == (missing ? IngestStatus::text_missing : IngestStatus::resolved));
    if (!missing) {
      // The bibliography of every fixture text is dropped by cleaning.
      CHECK(d.cleaned_text.find("An unrelated citation string") == std::string::npos);
      CHECK_FALSE(d.cleaned_text.empty());
    }
  }
}

TEST_CASE("an unreadable text is isolated as extraction_failed") {
  test_support::TempDir tmp;
  text::write_file(tmp.path() / "A.txt", "Alpha body text.");
  text::write_file(tmp.path() / "B.json", "{ not json");
  text::write_file(tmp.path() / "C.txt", "Gamma body text.");
  CorpusManifest m;
  m.target_id = "T";
  m.entries = {paper("A"), paper("B"), paper("C")};
  DirectoryTextSource source(tmp.path());
  const auto docs = resolve_full_texts(m, source, 2);
  CHECK(docs[0].ingest_status == IngestStatus::resolved);
  CHECK(docs[1].ingest_status == IngestStatus::extraction_failed);
  CHECK(docs[2].ingest_status == IngestStatus::resolved);
}

TEST_CASE("three entries with one missing text index two documents") {
  test_support::TempDir tmp;
  text::write_file(tmp.path() / "A.txt", "Alpha body text.");
  text::write_file(tmp.path() / "C.txt", "Gamma body text.");
  CorpusManifest m;
  m.target_id = "T";
  m.entries = {paper("A"), paper("B"), paper("C")};
  DirectoryTextSource source(tmp.path());
  const DocumentCatalog catalog(m, resolve_full_texts(m, source));
  CHECK(catalog.indexable().size() == 2);
}

TEST_CASE("extraction records from the PDF converter are ingested and chunked") {
  // Record layout written by the extract-pdfs tool.
  test_support::TempDir tmp;
  const std::string sentinel = "The sentinel sentence survives extraction.";
  const nlohmann::json record{{"source_path", "pdfs/R1.pdf"},
                              {"doc_id", "R1"},
                              {"title", "Record One"},
                              {"raw_text", "Record One\n\n" + sentinel + "\n\nReferences\n[1] Someone. 2001.\n"},
                              {"page_count", 3},
                              {"extraction_warnings", nlohmann::json::array({"page 2: no text layer"})}};
  text::write_file(tmp.path() / "R1.json", record.dump());
  DirectoryTextSource source(tmp.path());
  const Document doc = resolve_document(paper("R1"), source);
  REQUIRE(doc.ingest_status == IngestStatus::resolved);
  CHECK(doc.raw_text.find(sentinel) != std::string::npos);
  CHECK(doc.cleaned_text.find("Someone") == std::string::npos);
  ingest::WordPunctTokenizer tok;
  const auto chunks = ingest::chunk_document(doc, tok);
  REQUIRE_FALSE(chunks.empty());
  std::string joined;
  for (const auto &c : chunks) {
    joined += c.text;
  }
  CHECK(joined == doc.cleaned_text);

  // A record with empty text is a failure, not a resolved document.
  text::write_file(tmp.path() / "R2.json", nlohmann::json{{"doc_id", "R2"}, {"raw_text", "  "}}.dump());
  CHECK(resolve_document(paper("R2"), source).ingest_status == IngestStatus::extraction_failed);
}

TEST_CASE("document names are stable and marker-safe") {
  auto m = paper("X");
  m.title = "A/B [test] #1 $$";
  CHECK(document_name(7, m) == "REF_007_A_B _test_ _1 __.pdf");
  m.title = "  Graph   Attention  ";
  CHECK(document_name(12, m) == "REF_012_Graph Attention.pdf");
}

TEST_CASE("catalog lookup by exact and folded name") {
  CorpusManifest m;
  m.entries = {paper("A"), paper("B")};
  Document a;
  a.meta = m.entries[0];
  Document b;
  b.meta = m.entries[1];
  const DocumentCatalog c(m, {a, b});
  CHECK(c.name_of("B") == "REF_002_Title B.pdf");
  REQUIRE(c.by_name("REF_002_Title B.pdf") != nullptr);
  CHECK(c.by_name("ref_002_title   b.pdf")->meta.id == "B");
  CHECK(c.by_name("REF_003_x.pdf") == nullptr);
}

TEST_CASE("corpus persistence round-trips") {
  test_support::TempDir tmp;
  CorpusManifest m;
  m.target_id = "T";
  m.target = paper("T", date(2024, 5, 2));
  m.target.order = Order::target;
  m.entries = {paper("A", date(2020)), paper("B/1")};
  m.entries[1].order = Order::second;
  m.entries[1].cited_by_first_order = 2;
  m.entries[1].source_url = "https://example.org/b";
  Document t;
  t.meta = m.target;
  t.raw_text = t.cleaned_text = "target text";
  t.ingest_status = IngestStatus::resolved;
  Document a;
  a.meta = m.entries[0];
  a.raw_text = "a\nReferences\nx";
  a.cleaned_text = "a";
  a.ingest_status = IngestStatus::resolved;
  Document b;
  b.meta = m.entries[1];
  save_corpus(tmp.path(), m, t, {a, b});
  const auto loaded = load_corpus(tmp.path());
  CHECK(loaded.manifest.entries == m.entries);
  CHECK(loaded.manifest.target == m.target);
  CHECK(loaded.target.cleaned_text == "target text");
  REQUIRE(loaded.documents.size() == 2);
  CHECK(loaded.documents[0].raw_text == a.raw_text);
  CHECK(loaded.documents[1].ingest_status == IngestStatus::text_missing);
}
