#pragma once

#include "novelty/assets.hpp"
#include "novelty/corpus.hpp"
#include "novelty/ingest.hpp"
#include "novelty/providers.hpp"
#include "novelty/report.hpp"
#include "novelty/retrieval.hpp"

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace novelty::generation {

using report::NoveltyPoint;
using report::PointAnalysis;
using report::Report;

inline constexpr std::size_t kMaxPoints = 5;
inline constexpr std::size_t kContextCap = 42;

inline constexpr std::string_view kNoSimilarities =
    "Based on the retrieved related texts, no explicit similarities with existing work were identified.";
inline constexpr std::string_view kNoUniqueDifferences =
    "Based on the retrieved related texts, no unique differences were identified for this novelty point.";

// Everything an agent stage needs besides its inputs.
struct Agents {
  ChatProvider &chat;
  const assets::PromptLibrary &prompts;
  const assets::QueryRules &rules;
};

struct QuerySet {
  int point_index = 0;
  std::vector<std::string> queries;
};

// --- parsers (pure) -----------------------------------------------------------

struct ParsedPoints {
  bool sentinel = false;
  std::vector<NoveltyPoint> points;
  std::string problem; // non-empty when the output is unusable as-is
};
ParsedPoints parse_novelty_points(std::string_view output);

// Numbered lines ("1. ..." / "1) ...") with surrounding quotes removed.
std::vector<std::string> parse_numbered_lines(std::string_view output);

// Empty when the set satisfies the count and stop-phrase rules.
std::string query_problem(const std::vector<std::string> &queries, std::size_t count,
                          const std::vector<std::string> &stop_phrases);

struct ParsedAnalysis {
  std::string a, b, c;
  std::optional<std::string> d;
  std::string problem;
};
ParsedAnalysis parse_analysis(std::string_view output);

// "[Chunk n]\nSource Document: <name>\nContent: <text>" blocks.
std::string format_knowledge(const std::vector<retrieval::ContextChunk> &context,
                             const corpus::DocumentCatalog &catalog);

// --- agent stages ----------------------------------------------------------------

std::string summarize_paper(const std::string &paper_name, const std::string &paper_text,
                            const Agents &agents);

std::vector<NoveltyPoint> extract_novelty_points(const std::string &paper_name,
                                                 const std::string &paper_text,
                                                 const Agents &agents);

QuerySet generate_queries(const std::string &paper_name, const NoveltyPoint &point,
                          const Agents &agents);

// Unknown ##name$$ markers are dropped and reported through `warnings`.
PointAnalysis analyze_point(const std::string &paper_name, const NoveltyPoint &point,
                            const std::vector<retrieval::ContextChunk> &context,
                            const corpus::DocumentCatalog &catalog, const Agents &agents,
                            std::vector<std::string> *warnings = nullptr);

// Returns (section-3 body, score). Empty analyses skip the model.
std::pair<std::string, int> summarize_novelty(const std::vector<PointAnalysis> &analyses,
                                              const Agents &agents);

// Rewrites markers to numerals in first-citation order and builds the
// references list.
Report assemble_report(const std::string &paper_name, std::string summary,
                       std::vector<PointAnalysis> analyses,
                       std::pair<std::string, int> novelty,
                       const corpus::DocumentCatalog &catalog);

// Section 2 as the summarizer sees it (markers stripped).
std::string draft_section2(const std::vector<PointAnalysis> &analyses);

// --- pipeline ---------------------------------------------------------------

struct GenerationOptions {
  std::size_t target_budget_tokens = 60000;
  std::size_t context_cap = kContextCap;
  std::size_t max_parallel = 4;
};

struct PointTrace {
  QuerySet queries;
  std::vector<retrieval::RetrievedContext> contexts;
  std::vector<retrieval::ContextChunk> merged;
};

struct GenerationResult {
  Report report;
  std::string markdown;
  std::vector<PointTrace> traces;
  std::vector<std::string> warnings;
};

GenerationResult generate_report(const corpus::Document &target,
                                 const corpus::DocumentCatalog &catalog,
                                 const retrieval::Retriever &retriever,
                                 const ingest::Tokenizer &tokenizer, const Agents &agents,
                                 const GenerationOptions &options = {});

nlohmann::json trace_to_json(const PointTrace &trace);

} // namespace novelty::generation
