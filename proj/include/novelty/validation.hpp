#pragma once

#include "novelty/assets.hpp"
#include "novelty/corpus.hpp"
#include "novelty/ingest.hpp"
#include "novelty/providers.hpp"
#include "novelty/report.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Citation-level self-validation of a rendered report:
// extract -> dedup -> verify -> correct -> polish, one pass.
namespace novelty::validation {

struct Agents {
  ChatProvider &chat;
  const assets::PromptLibrary &prompts;
};

struct CitationClaim {
  std::string original_statement;
  std::string claim_explanation;
  std::string reference_name; // as returned by the model
  std::string doc_id;
};

enum class Verdict { correct, incorrect };

struct VerificationVerdict {
  CitationClaim claim;
  Verdict result = Verdict::correct;
  std::optional<std::string> error_reason;
  std::optional<std::string> correction;
  bool defaulted = false; // fail-open fill-in for a missing verdict
};

struct ValidationOptions {
  bool fail_closed = false;
  std::size_t source_budget_tokens = 60000;
  std::size_t max_parallel = 4;
  bool polish = true;
};

// --- parsers (pure) -----------------------------------------------------------

// JSON list of {original_statement, claim_explanation, reference_name}.
// Throws MalformedOutput on invalid JSON or a non-list.
std::vector<CitationClaim> parse_claims(std::string_view output);

// "[1, 3, 5]" -> {1, 3, 5}; non-integers are skipped. Throws MalformedOutput
// when no list is present.
std::vector<int> parse_index_list(std::string_view output);

struct RawVerdict {
  int idx = 0;
  std::string result;
  std::optional<std::string> error_reason;
  std::optional<std::string> correction;
};
std::vector<RawVerdict> parse_verdicts(std::string_view output);

// Resolves "[n] REF_x.pdf", "[n]", "n", "##REF_x.pdf$$" or a bare name to a
// references entry of the report.
std::optional<report::Reference> resolve_reference(std::string_view reference_name,
                                                   const std::vector<report::Reference> &refs);

// The report span matching `statement`: verbatim, else by whitespace-
// normalised comparison mapped back onto the original bytes.
std::optional<std::string> locate_statement(std::string_view report, std::string_view statement);

// --- stages -----------------------------------------------------------------------

std::vector<CitationClaim> extract_claims(std::string_view markdown,
                                          const std::vector<report::Reference> &refs,
                                          const Agents &agents,
                                          std::vector<std::string> *warnings = nullptr);

// Groups by doc_id (first-seen order) and asks the model to drop duplicates
// within each group of two or more.
std::vector<CitationClaim> dedup_claims(const std::vector<CitationClaim> &claims,
                                        const Agents &agents);

std::vector<VerificationVerdict> verify_claims(const corpus::Document &doc,
                                               const std::vector<CitationClaim> &claims,
                                               const ingest::Tokenizer &tokenizer,
                                               const Agents &agents,
                                               const ValidationOptions &options = {});

// Identity without incorrect verdicts. Otherwise the rewrite must keep the
// headers, the references section byte for byte, the score and the set of
// cited numerals, else StructureViolation.
std::string correct_report(std::string_view markdown,
                           const std::vector<VerificationVerdict> &verdicts, const Agents &agents);

struct PolishOutcome {
  std::string markdown;
  bool applied = false;
  std::vector<std::string> rejected_because;
};

// Falls back to the input when the polished text breaks a preservation rule.
PolishOutcome polish_report(std::string_view markdown, const Agents &agents);

std::vector<std::string> preservation_violations(std::string_view before, std::string_view after);

// --- line diff ----------------------------------------------------------------------

struct DiffLine {
  char op = ' '; // '-' removed from old, '+' added in new
  std::size_t old_line = 0; // 1-based; 0 for '+'
  std::size_t new_line = 0; // 1-based; 0 for '-'
  std::string text;
};

// Changed lines only (LCS over lines).
std::vector<DiffLine> line_diff(std::string_view before, std::string_view after);

// --- pipeline ---------------------------------------------------------------------

struct ValidationResult {
  std::string input;
  std::vector<CitationClaim> extracted;
  std::vector<CitationClaim> kept;
  std::vector<VerificationVerdict> verdicts;
  std::string corrected;
  std::vector<DiffLine> correction_diff;
  PolishOutcome polish;
  std::string output;
  std::vector<std::string> warnings;
};

ValidationResult validate_report(std::string_view markdown, const corpus::DocumentCatalog &catalog,
                                 const ingest::Tokenizer &tokenizer, const Agents &agents,
                                 const ValidationOptions &options = {});

nlohmann::json to_json(const CitationClaim &c);
nlohmann::json to_json(const VerificationVerdict &v);
nlohmann::json claims_artifact(const ValidationResult &r);
nlohmann::json verdicts_artifact(const ValidationResult &r);
nlohmann::json corrections_artifact(const ValidationResult &r);

// Reads verdicts.json back into (claim count, incorrect count).
struct VerdictCounts {
  std::size_t claims = 0;
  std::size_t incorrect = 0;
};
VerdictCounts count_verdicts(const nlohmann::json &verdicts_artifact);

} // namespace novelty::validation
