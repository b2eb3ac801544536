#pragma once

#include "novelty/corpus.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace novelty::ingest {

inline constexpr std::size_t kDefaultChunkTokens = 512;

// A tokenizer partitions text into consecutive byte ranges. Token i covers
// [ends[i-1], ends[i]) with ends[-1] = 0, and ends.back() == text.size() when
// the text contains any token.
class Tokenizer {
public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::size_t> token_ends(std::string_view text) const = 0;

  std::size_t count(std::string_view text) const { return token_ends(text).size(); }
  // Longest prefix holding at most max_tokens tokens.
  std::string_view head(std::string_view text, std::size_t max_tokens) const;
};

// Default tokenizer: a token is a maximal run of letters/digits (any byte >=
// 0x80 counts as a letter) or a single other non-space character. Leading
// whitespace belongs to the token it precedes; trailing whitespace belongs to
// the last token.
class WordPunctTokenizer final : public Tokenizer {
public:
  std::vector<std::size_t> token_ends(std::string_view text) const override;
};

// Headings recognised as the start of a bibliography, matched
// case-insensitively against a whole line.
const std::vector<std::string> &reference_headings();

// Drops the trailing bibliography: everything from the last line that is a
// reference heading (optionally numbered, '#'-prefixed or ':'-suffixed),
// together with the whitespace just before it. Text without such a heading,
// or whose only heading is the first line, is returned unchanged.
std::string clean_text(std::string_view raw);

struct Chunk {
  std::string chunk_id;
  std::string doc_id;
  std::size_t ordinal = 0;
  std::string text;
  std::size_t token_count = 0;

  bool operator==(const Chunk &) const = default;
};

// Flat token-count split with no overlap: joining the chunks in ordinal order
// reproduces doc.cleaned_text byte for byte.
std::vector<Chunk> chunk_document(const corpus::Document &doc, const Tokenizer &tokenizer,
                                  std::size_t max_tokens = kDefaultChunkTokens);

std::vector<Chunk> chunk_corpus(const std::vector<const corpus::Document *> &docs,
                                const Tokenizer &tokenizer,
                                std::size_t max_tokens = kDefaultChunkTokens,
                                std::size_t parallelism = 4);

// JSON-lines chunk store: {chunk_id, doc_id, ordinal, token_count, text}.
void write_chunks(const std::filesystem::path &path, const std::vector<Chunk> &chunks);
std::vector<Chunk> read_chunks(const std::filesystem::path &path);

} // namespace novelty::ingest
