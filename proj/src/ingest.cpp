#include "novelty/ingest.hpp"

#include "novelty/error.hpp"
#include "novelty/parallel.hpp"
#include "novelty/text.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <fstream>

namespace novelty::ingest {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_word(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) != 0;
}

} // namespace

std::string_view Tokenizer::head(std::string_view text, std::size_t max_tokens) const {
  const auto ends = token_ends(text);
  if (ends.size() <= max_tokens) {
    return text;
  }
  return max_tokens == 0 ? std::string_view{} : text.substr(0, ends[max_tokens - 1]);
}

std::vector<std::size_t> WordPunctTokenizer::token_ends(std::string_view text) const {
  std::vector<std::size_t> ends;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && is_space(text[i])) {
      ++i;
    }
    if (i == n) {
      break;
    }
    if (is_word(text[i])) {
      while (i < n && is_word(text[i])) {
        ++i;
      }
    } else {
      ++i;
    }
    ends.push_back(i);
  }
  if (!ends.empty()) {
    ends.back() = n;
  }
  return ends;
}

const std::vector<std::string> &reference_headings() {
  static const std::vector<std::string> headings = {
      "references",        "reference",       "bibliography",    "works cited",
      "literature cited",  "cited literature", "reference list", "references and notes",
      "list of references"};
  return headings;
}

namespace {

// "7", "7.", "VII.", "A.", "8 " style section numbers in front of a heading.
std::string_view strip_section_number(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) != 0 || s[i] == '.')) {
    ++i;
  }
  if (i == 0) {
    // Roman numerals or a single letter, only when followed by '.' or ')'.
    std::size_t j = 0;
    while (j < s.size() && j < 6 && std::string_view("IVXLivxl").find(s[j]) != std::string_view::npos) {
      ++j;
    }
    if (j == 0 && !s.empty() && std::isalpha(static_cast<unsigned char>(s[0])) != 0) {
      j = 1;
    }
    if (j > 0 && j < s.size() && (s[j] == '.' || s[j] == ')')) {
      i = j + 1;
    }
  }
  s.remove_prefix(i);
  while (!s.empty() && is_space(s.front())) {
    s.remove_prefix(1);
  }
  return s;
}

bool is_reference_heading(std::string_view line) {
  std::string t = text::trim(line);
  std::string_view v(t);
  while (!v.empty() && (v.front() == '#' || v.front() == '*')) {
    v.remove_prefix(1);
  }
  while (!v.empty() && (v.back() == ':' || v.back() == '*')) {
    v.remove_suffix(1);
  }
  v = std::string_view(text::trim(v));
  const std::string candidate = text::to_lower(text::trim(strip_section_number(v)));
  for (const auto &h : reference_headings()) {
    if (candidate == h) {
      return true;
    }
  }
  return false;
}

} // namespace

std::string clean_text(std::string_view raw) {
  std::size_t cut = std::string_view::npos;
  std::size_t line_start = 0;
  while (line_start < raw.size()) {
    std::size_t nl = raw.find('\n', line_start);
    const std::size_t line_end = nl == std::string_view::npos ? raw.size() : nl;
    if (is_reference_heading(raw.substr(line_start, line_end - line_start))) {
      cut = line_start;
    }
    if (nl == std::string_view::npos) {
      break;
    }
    line_start = nl + 1;
  }
  if (cut == std::string_view::npos) {
    return std::string(raw);
  }
  std::size_t keep = cut;
  while (keep > 0 && is_space(raw[keep - 1])) {
    --keep;
  }
  if (keep == 0) {
    return std::string(raw);
  }
  return std::string(raw.substr(0, keep));
}

std::vector<Chunk> chunk_document(const corpus::Document &doc, const Tokenizer &tokenizer,
                                  std::size_t max_tokens) {
  if (max_tokens == 0) {
    fail(ErrorKind::InvalidInput, "max_tokens must be positive");
  }
  if (doc.ingest_status != corpus::IngestStatus::resolved) {
    fail(ErrorKind::InvalidInput, "document " + doc.meta.id + " is not resolved");
  }
  const std::string &text = doc.cleaned_text;
  const auto ends = tokenizer.token_ends(text);
  if (ends.empty()) {
    fail(ErrorKind::EmptyDocument, "document " + doc.meta.id + " has no text");
  }
  std::vector<Chunk> chunks;
  std::size_t begin_byte = 0;
  for (std::size_t first = 0; first < ends.size(); first += max_tokens) {
    const std::size_t last = std::min(first + max_tokens, ends.size());
    const std::size_t end_byte = ends[last - 1];
    Chunk c;
    c.doc_id = doc.meta.id;
    c.ordinal = chunks.size();
    c.chunk_id = doc.meta.id + "#" + std::to_string(c.ordinal);
    c.text = text.substr(begin_byte, end_byte - begin_byte);
    c.token_count = last - first;
    chunks.push_back(std::move(c));
    begin_byte = end_byte;
  }
  return chunks;
}

std::vector<Chunk> chunk_corpus(const std::vector<const corpus::Document *> &docs,
                                const Tokenizer &tokenizer, std::size_t max_tokens,
                                std::size_t parallelism) {
  std::vector<std::vector<Chunk>> per_doc(docs.size());
  parallel_for(docs.size(), parallelism, [&](std::size_t i) {
    per_doc[i] = chunk_document(*docs[i], tokenizer, max_tokens);
  });
  std::vector<Chunk> all;
  for (auto &chunks : per_doc) {
    all.insert(all.end(), std::make_move_iterator(chunks.begin()),
               std::make_move_iterator(chunks.end()));
  }
  return all;
}

void write_chunks(const std::filesystem::path &path, const std::vector<Chunk> &chunks) {
  std::string out;
  for (const auto &c : chunks) {
    nlohmann::json j;
    j["chunk_id"] = c.chunk_id;
    j["doc_id"] = c.doc_id;
    j["ordinal"] = c.ordinal;
    j["token_count"] = c.token_count;
    j["text"] = c.text;
    out += j.dump();
    out += '\n';
  }
  text::write_file(path, out);
}

std::vector<Chunk> read_chunks(const std::filesystem::path &path) {
  std::vector<Chunk> chunks;
  for (const auto &line : text::split_lines(text::read_file(path))) {
    if (text::trim(line).empty()) {
      continue;
    }
    try {
      const auto j = nlohmann::json::parse(line);
      Chunk c;
      c.chunk_id = j.at("chunk_id").get<std::string>();
      c.doc_id = j.at("doc_id").get<std::string>();
      c.ordinal = j.at("ordinal").get<std::size_t>();
      c.token_count = j.at("token_count").get<std::size_t>();
      c.text = j.at("text").get<std::string>();
      chunks.push_back(std::move(c));
    } catch (const nlohmann::json::exception &e) {
      fail(ErrorKind::InvalidInput, "bad chunk record in " + path.string() + ": " + e.what());
    }
  }
  return chunks;
}

} // namespace novelty::ingest
