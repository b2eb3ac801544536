#pragma once

#include "novelty/assets.hpp"
#include "novelty/corpus.hpp"
#include "novelty/ingest.hpp"
#include "novelty/providers.hpp"
#include "novelty/retrieval.hpp"
#include "novelty/validation.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Checklist-based report grading, score aggregation, faithfulness metrics
// and evaluator cross-validation.
namespace novelty::evaluation {

inline constexpr std::array<std::string_view, 5> kDimensions{
    "Fluency", "Effectiveness", "Completeness", "Faithfulness", "Depth"};

struct Agents {
  ChatProvider &chat;
  const assets::PromptLibrary &prompts;
  const assets::QueryRules &rules;
};

// --- scoring (pure) ------------------------------------------------------------------

struct DimensionScore {
  std::string dimension;
  std::size_t yes_count = 0;
  std::size_t total = 0;
  double score = 0.0; // 10 * yes / total
};

DimensionScore score_dimension(std::string dimension, const std::vector<bool> &answers);

// Unweighted mean over exactly the five dimensions.
double aggregate_overall(const std::vector<DimensionScore> &dimensions);

struct FaithfulnessMetrics {
  double tf = 0.0;
  double cf = 0.0;
  double ca = 100.0;
  bool no_citations = false;
};

// Answers are index-aligned with the faithfulness dimension's items.
FaithfulnessMetrics compute_faithfulness_metrics(const assets::Dimension &faithfulness,
                                                 const std::vector<bool> &answers,
                                                 const validation::VerdictCounts &verdicts);

// --- model I/O -------------------------------------------------------------------------

// "Qn: answer" lines. Values are the raw answer text.
std::vector<std::pair<int, std::string>> parse_answer_lines(std::string_view output);
// yes/no from a raw answer ("[Yes]", "**no**", "Yes - because ..."); nullopt otherwise.
std::optional<bool> parse_yes_no(std::string_view answer);

std::string format_questions(const assets::Dimension &dim);

std::vector<std::string> generate_eval_queries(std::string_view report_text,
                                               const assets::Dimension &dim, const Agents &agents);

struct ItemAnswer {
  std::string item_id;
  bool yes = false;
  bool defaulted = false; // unparseable answer scored as no
};

std::vector<ItemAnswer> answer_checklist(std::string_view report_text, const assets::Dimension &dim,
                                         std::string_view database, const Agents &agents);

// --- per-report pipeline ---------------------------------------------------------------

struct EvaluationOptions {
  std::size_t report_budget_tokens = 20000;  // report text inside the query prompt
  std::size_t target_budget_tokens = 60000;  // main paper text in the database
  std::size_t context_cap = 42;
};

struct DimensionResult {
  DimensionScore score;
  std::vector<ItemAnswer> answers;
  std::vector<std::string> queries; // empty when the dimension needs no retrieval
};

struct EvaluationResult {
  std::string report_id;
  std::vector<DimensionResult> dimensions; // kDimensions order
  double overall = 0.0;
  std::optional<FaithfulnessMetrics> metrics;
};

// `retriever` may be null only when no dimension needs retrieval.
// `verdicts` (from validation artifacts) enables CA; TF/CF are always set.
EvaluationResult evaluate_report(const std::string &report_id, std::string_view report_text,
                                 const corpus::Document &target,
                                 const corpus::DocumentCatalog &catalog,
                                 const retrieval::Retriever *retriever,
                                 const ingest::Tokenizer &tokenizer,
                                 const assets::Checklist &checklist, const Agents &agents,
                                 const std::optional<validation::VerdictCounts> &verdicts,
                                 const EvaluationOptions &options = {});

nlohmann::json to_json(const EvaluationResult &r);
EvaluationResult evaluation_from_json(const nlohmann::json &j);

// Across reports: macro = mean of per-report scores, micro = pooled
// yes/total. Overall in each mode is the mean of its five dimensions.
struct Aggregate {
  std::vector<DimensionScore> micro;
  std::vector<double> macro;
  double overall_macro = 0.0;
  double overall_micro = 0.0;
  std::size_t reports = 0;
};
Aggregate aggregate_results(const std::vector<EvaluationResult> &results);
nlohmann::json to_json(const Aggregate &a);

// --- cross-validation ------------------------------------------------------------------

struct ScoreMatrix {
  std::vector<std::string> models;
  std::vector<std::string> papers;
  std::vector<std::vector<double>> scores; // [paper][model]
};

// CSV with header "paper,<model>,..." or JSON {models, papers, scores}.
ScoreMatrix load_matrix(const std::filesystem::path &path);
ScoreMatrix parse_matrix_csv(std::string_view csv);
ScoreMatrix parse_matrix_json(const nlohmann::json &j);

enum class Strategy { leave_one_out, all_models };

struct ModelError {
  std::string model;
  double mae = 0.0;
  double mse = 0.0;
};

std::vector<ModelError> cross_validate(const ScoreMatrix &matrix, Strategy strategy);
nlohmann::json to_json(const std::vector<ModelError> &errors, Strategy strategy);

} // namespace novelty::evaluation
