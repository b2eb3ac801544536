#include "novelty/ingest.hpp"
#include "novelty/text.hpp"

#include "support.hpp"

#include <regex>

using namespace novelty;
using namespace novelty::ingest;

namespace {

corpus::Document doc_with(std::string text, std::string id = "D") {
  corpus::Document d;
  d.meta.id = std::move(id);
  d.raw_text = text;
  d.cleaned_text = std::move(text);
  d.ingest_status = corpus::IngestStatus::resolved;
  return d;
}

std::string words(std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    s += (i == 0 ? "w" : " w") + std::to_string(i);
  }
  return s;
}

std::string random_text(std::mt19937_64 &rng, std::size_t len) {
  static const std::vector<std::string> atoms{"a",  "graph", " ",  "  ", "\n", "\n\n", "\t", ".",   ",",
                                              "é",  "中",    "🙂", "42", "x-y", "\r\n", "(",  "ODE", "--"};
  std::string s;
  while (s.size() < len) {
    s += atoms[rng() % atoms.size()];
  }
  return s;
}

} // namespace

TEST_CASE("tokenizer partitions text into contiguous ranges") {
  WordPunctTokenizer tok;
  CHECK(tok.count("") == 0);
  CHECK(tok.count("   ") == 0);
  CHECK(tok.token_ends("Hello, world!") == std::vector<std::size_t>{5, 6, 12, 13});
  // Leading whitespace joins the first token, trailing whitespace the last.
  CHECK(tok.token_ends("  ab cd  ") == std::vector<std::size_t>{4, 9});
  // Multibyte characters are letters.
  CHECK(tok.count("naïve 中文") == 2);
}

TEST_CASE("property: token ranges cover the text exactly") {
  WordPunctTokenizer tok;
  auto rng = test_support::rng(3);
  for (int i = 0; i < 300; ++i) {
    const std::string s = random_text(rng, rng() % 400);
    const auto ends = tok.token_ends(s);
    for (std::size_t k = 1; k < ends.size(); ++k) {
      REQUIRE(ends[k] > ends[k - 1]);
    }
    if (!ends.empty()) {
      CHECK(ends.back() == s.size());
    } else {
      CHECK(text::trim(s).empty());
    }
  }
}

TEST_CASE("head keeps the longest prefix within the budget") {
  WordPunctTokenizer tok;
  const std::string s = "one two three four";
  CHECK(tok.head(s, 0) == "");
  CHECK(tok.head(s, 2) == "one two");
  CHECK(tok.head(s, 10) == s);
}

TEST_CASE("clean_text leaves text without a references heading unchanged") {
  const std::string s = "Intro.\nWe cite things [1].\nConclusion.";
  CHECK(clean_text(s) == s);
}

TEST_CASE("clean_text drops the bibliography") {
  CHECK(clean_text("body...\nReferences\n[1] ...") == "body...");
  CHECK(clean_text("body\n\n## 7. REFERENCES:\n[1] x") == "body");
}

TEST_CASE("clean_text matches a regex oracle over the heading synonyms") {
  // Oracle: the last whole line equal (case-insensitively) to a heading,
  // optionally numbered or '#'-prefixed, and everything after it.
  std::string alternatives;
  for (const auto &h : reference_headings()) {
    alternatives += (alternatives.empty() ? "" : "|") + h;
  }
  const std::regex heading("^[ \\t]*(#+[ \\t]*)?([0-9IVX]+[.)]?[ \\t]+)?(" + alternatives + ")[ \\t]*:?[ \\t]*$",
                           std::regex::icase);
  const std::vector<std::string> fixtures{
      "Main text about graphs.\n\nBiBLIOGRAPHY\n[1] A. B. Title. 2001.\n",
      "Line one.\nWorks Cited\n- Someone\n",
      "Paper.\nReferences\nfirst list\nMore body mentioning references in prose.\nreferences\nsecond list\n",
      "No heading here at all.\n",
  };
  for (const auto &f : fixtures) {
    const auto lines = text::split_lines(f);
    std::optional<std::size_t> cut;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (i > 0 && std::regex_match(lines[i], heading)) {
        cut = offset;
      }
      offset += lines[i].size() + 1;
    }
    std::string expected = f;
    if (cut) {
      expected = f.substr(0, *cut);
      while (!expected.empty() && std::isspace(static_cast<unsigned char>(expected.back())) != 0) {
        expected.pop_back();
      }
    }
    CHECK(clean_text(f) == expected);
  }
}

TEST_CASE("chunking splits on exact token counts") {
  WordPunctTokenizer tok;
  auto c = chunk_document(doc_with(words(1024)), tok, 512);
  REQUIRE(c.size() == 2);
  CHECK(c[0].token_count == 512);
  CHECK(c[1].token_count == 512);

  c = chunk_document(doc_with(words(1025)), tok, 512);
  REQUIRE(c.size() == 3);
  CHECK(c[0].token_count == 512);
  CHECK(c[1].token_count == 512);
  CHECK(c[2].token_count == 1);
  CHECK(c[2].ordinal == 2);
  CHECK(c[2].doc_id == "D");
  CHECK(c[0].chunk_id != c[1].chunk_id);
}

TEST_CASE("documents without tokens cannot be chunked") {
  WordPunctTokenizer tok;
  CHECK(test_support::error_kind_of([&] { chunk_document(doc_with(" \n "), tok); }) == ErrorKind::EmptyDocument);
  CHECK(test_support::error_kind_of([&] { chunk_document(doc_with("x"), tok, 0); }) == ErrorKind::InvalidInput);
}

TEST_CASE("property: chunks reassemble the document and respect the limit") {
  WordPunctTokenizer tok;
  auto rng = test_support::rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto d = doc_with("x" + random_text(rng, rng() % 3000));
    const std::size_t max = 1 + rng() % 64;
    const auto chunks = chunk_document(d, tok, max);
    std::string joined;
    std::size_t total = 0;
    for (std::size_t k = 0; k < chunks.size(); ++k) {
      joined += chunks[k].text;
      total += chunks[k].token_count;
      REQUIRE(chunks[k].token_count <= max);
      REQUIRE(chunks[k].token_count == tok.count(chunks[k].text));
      CHECK(chunks[k].ordinal == k);
    }
    REQUIRE(joined == d.cleaned_text);
    CHECK(total == tok.count(d.cleaned_text));
  }
}

TEST_CASE("token counts per fixture document sum to the document length") {
  WordPunctTokenizer tok;
  std::vector<corpus::Document> docs;
  for (int k = 0; k < 10; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "doc_%02d.txt", k);
    docs.push_back(doc_with(text::read_file(test_support::fixture_dir() / "chunker" / name), name));
  }
  std::vector<const corpus::Document *> ptrs;
  for (const auto &d : docs) {
    ptrs.push_back(&d);
  }
  const auto chunks = chunk_corpus(ptrs, tok, 512, 3);
  for (const auto &d : docs) {
    std::size_t sum = 0;
    for (const auto &c : chunks) {
      sum += c.doc_id == d.meta.id ? c.token_count : 0;
    }
    // Independent count: number of maximal alnum runs plus other non-space bytes
    // (multibyte sequences count as letters).
    std::size_t independent = 0;
    const std::string &s = d.cleaned_text;
    for (std::size_t i = 0; i < s.size();) {
      const auto u = static_cast<unsigned char>(s[i]);
      if (std::isspace(u) != 0) {
        ++i;
      } else if (std::isalnum(u) != 0 || u >= 0x80) {
        while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) != 0 ||
                                static_cast<unsigned char>(s[i]) >= 0x80)) {
          ++i;
        }
        ++independent;
      } else {
        ++i;
        ++independent;
      }
    }
    CHECK(sum == independent);
  }
}

TEST_CASE("chunk store round-trips") {
  test_support::TempDir tmp;
  WordPunctTokenizer tok;
  const auto chunks = chunk_document(doc_with("alpha \"quoted\"\nline\ttab 中文 " + words(40)), tok, 7);
  write_chunks(tmp.path() / "chunks.jsonl", chunks);
  CHECK(read_chunks(tmp.path() / "chunks.jsonl") == chunks);
}
