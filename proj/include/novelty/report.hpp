#pragma once

#include "novelty/corpus.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

// Report model shared by generation, validation and evaluation: rendering to
// markdown, parsing it back, and the structural checks both stages rely on.
namespace novelty::report {

enum class Classification {
  methodological,
  theoretical,
  system,
  dataset,
  empirical,
  task,
};

std::string_view to_string(Classification c); // "Methodological/Algorithmic", ...
// Accepts the canonical label, either half of it ("Dataset", "Benchmark"),
// case-insensitively.
std::optional<Classification> parse_classification(std::string_view s);

struct NoveltyPoint {
  int index = 0; // 1-based
  Classification classification = Classification::methodological;
  std::string description;
};

struct Citation {
  std::string sentence; // marker-free sentence text
  std::string doc_id;
};

struct PointAnalysis {
  NoveltyPoint point;
  std::string claimed_novelty;
  std::string similarities;
  std::string unique_differences;
  std::optional<std::string> details;
  std::vector<Citation> citations;
};

struct Reference {
  std::string doc_id;
  std::string name; // REF_xxx_title.pdf
};

struct Report {
  std::string paper_name;
  std::string content_summary;
  std::vector<PointAnalysis> analyses;
  std::string novelty_summary; // body of section 3, header excluded
  int score = 1;
  std::vector<Reference> references; // references[n-1] <-> "[n]"
};

inline constexpr std::string_view kSection1 = "## 1. Paper Content Summary";
inline constexpr std::string_view kSection2 = "## 2. Point-wise Novelty Analysis";
inline constexpr std::string_view kSection3 = "## 3. Novelty Summary";
inline constexpr std::string_view kReferences = "## References";
inline constexpr std::string_view kNoClaims = "No explicit innovation claims identified.";

// --- citation markers (##document_name$$) ------------------------------------

struct Marker {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string name;
};

std::vector<Marker> find_markers(std::string_view text);
std::string strip_markers(std::string_view text);

// Sentence (marker-free, trimmed) that a marker at `pos` closes.
std::string sentence_before(std::string_view text, std::size_t pos);

// Replaces each marker with "[n]" where n = number_of(name). Adjacent
// markers render as "[1][2]"; whitespace before the first one collapses to a
// single space.
std::string rewrite_markers(std::string_view text,
                            const std::function<int(const std::string &)> &number_of);

// --- rendering / parsing --------------------------------------------------

std::string render_markdown(const Report &r);
nlohmann::json to_json(const Report &r);

// Parses a rendered report. Reference doc ids are resolved through the
// catalog when one is given, else left equal to the name.
Report parse_report(std::string_view markdown, const corpus::DocumentCatalog *catalog = nullptr);

// Integer score in {1..4}: the first integer token after the last
// "Final One-line Summary", else the first integer on the last non-empty
// line. Returns nullopt when absent or out of range.
std::optional<int> parse_score(std::string_view section3);

// --- structural checks ----------------------------------------------------------

// Text from the "## References" header to the end ("" if absent).
std::string references_section(std::string_view markdown);
// Text before the references header.
std::string body_section(std::string_view markdown);
// Every "[n]" numeral used in the body.
std::set<int> cited_numerals(std::string_view body);
// Top-level "## " headers in order.
std::vector<std::string> top_headers(std::string_view markdown);

// Empty when the markdown has headers 1,2,3 (+ References) in order, a
// parseable score and full citation closure.
std::vector<std::string> structure_violations(std::string_view markdown);

} // namespace novelty::report
