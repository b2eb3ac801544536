#include "novelty/evaluation.hpp"

#include "novelty/error.hpp"
#include "novelty/generation.hpp"
#include "novelty/log.hpp"
#include "novelty/text.hpp"

#include <cmath>
#include <map>
#include <regex>
#include <set>
#include <sstream>

namespace novelty::evaluation {

using nlohmann::json;

// --- scoring -------------------------------------------------------------------------

DimensionScore score_dimension(std::string dimension, const std::vector<bool> &answers) {
  if (answers.empty()) {
    fail(ErrorKind::EmptyAnswers, "no answers for dimension " + dimension);
  }
  DimensionScore s;
  s.dimension = std::move(dimension);
  s.total = answers.size();
  for (bool a : answers) {
    s.yes_count += a ? 1 : 0;
  }
  s.score = 10.0 * static_cast<double>(s.yes_count) / static_cast<double>(s.total);
  return s;
}

double aggregate_overall(const std::vector<DimensionScore> &dimensions) {
  double sum = 0.0;
  for (const auto name : kDimensions) {
    const auto it = std::find_if(dimensions.begin(), dimensions.end(),
                                 [&](const DimensionScore &d) { return d.dimension == name; });
    if (it == dimensions.end()) {
      fail(ErrorKind::MissingDimension, "missing dimension " + std::string(name));
    }
    sum += it->score;
  }
  return sum / static_cast<double>(kDimensions.size());
}

FaithfulnessMetrics compute_faithfulness_metrics(const assets::Dimension &faithfulness,
                                                 const std::vector<bool> &answers,
                                                 const validation::VerdictCounts &verdicts) {
  if (answers.size() != faithfulness.items.size()) {
    fail(ErrorKind::InvalidInput, "faithfulness answers are not aligned with its items");
  }
  std::size_t target_yes = 0, target_n = 0, cited_yes = 0, cited_n = 0;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    const auto &cls = faithfulness.items[i].faithfulness_class;
    if (!cls) {
      fail(ErrorKind::MissingClassAnnotations,
           "item " + faithfulness.items[i].id + " has no faithfulness_class");
    }
    if (*cls == assets::FaithClass::target) {
      ++target_n;
      target_yes += answers[i] ? 1 : 0;
    } else {
      ++cited_n;
      cited_yes += answers[i] ? 1 : 0;
    }
  }
  if (target_n == 0 || cited_n == 0) {
    fail(ErrorKind::MissingClassAnnotations, "faithfulness items must include both target and cited classes");
  }
  if (verdicts.incorrect > verdicts.claims) {
    fail(ErrorKind::InvalidInput, "more incorrect verdicts than claims");
  }
  FaithfulnessMetrics m;
  m.tf = 100.0 * static_cast<double>(target_yes) / static_cast<double>(target_n);
  m.cf = 100.0 * static_cast<double>(cited_yes) / static_cast<double>(cited_n);
  if (verdicts.claims == 0) {
    m.ca = 100.0;
    m.no_citations = true;
  } else {
    m.ca = 100.0 * static_cast<double>(verdicts.claims - verdicts.incorrect) /
           static_cast<double>(verdicts.claims);
  }
  return m;
}

// --- model I/O -----------------------------------------------------------------------

std::vector<std::pair<int, std::string>> parse_answer_lines(std::string_view output) {
  static const std::regex re(R"(^[\s*#>\-]*(?:\*\*)?Q\s*(\d+)\s*(?:\*\*)?\s*[:.)]\s*(?:\*\*)?\s*(.*)$)",
                             std::regex::icase);
  std::vector<std::pair<int, std::string>> out;
  for (const auto &line : text::split_lines(text::strip_code_fence(output))) {
    std::smatch m;
    if (std::regex_match(line, m, re)) {
      out.emplace_back(std::stoi(m[1].str()), text::trim(m[2].str()));
    }
  }
  return out;
}

std::optional<bool> parse_yes_no(std::string_view answer) {
  std::string s = text::to_lower(answer);
  std::size_t i = 0;
  while (i < s.size() && (s[i] == '[' || s[i] == '*' || s[i] == '"' || s[i] == '\'' ||
                          s[i] == '(' || std::isspace(static_cast<unsigned char>(s[i])) != 0)) {
    ++i;
  }
  const auto word_at = [&](std::string_view w) {
    if (s.compare(i, w.size(), w) != 0) {
      return false;
    }
    const std::size_t j = i + w.size();
    return j == s.size() || std::isalpha(static_cast<unsigned char>(s[j])) == 0;
  };
  if (word_at("yes")) {
    return true;
  }
  if (word_at("no")) {
    return false;
  }
  return std::nullopt;
}

std::string format_questions(const assets::Dimension &dim) {
  std::string out;
  for (std::size_t i = 0; i < dim.items.size(); ++i) {
    out += "Q" + std::to_string(i + 1) + ": " + dim.items[i].question;
    if (i + 1 < dim.items.size()) {
      out += "\n";
    }
  }
  return out;
}

std::vector<std::string> generate_eval_queries(std::string_view report_text,
                                               const assets::Dimension &dim, const Agents &agents) {
  const auto &t = agents.prompts.get("eval_queries");
  const assets::Vars vars{{"dimension_name", dim.name},
                          {"dimension_description", dim.definition},
                          {"dimension_conditions", dim.conditions},
                          {"formatted_questions", format_questions(dim)},
                          {"truncated_content", std::string(report_text)}};
  const std::string stage = "eval.queries." + dim.name;
  std::string correction;
  std::string problem;
  for (int attempt = 0; attempt < 2; ++attempt) {
    ChatRequest req{stage, "", assets::fill(t.user, vars)};
    if (!correction.empty()) {
      req.user += "\n\n" + correction;
    }
    auto queries = generation::parse_numbered_lines(agents.chat.chat(req));
    problem = generation::query_problem(queries, agents.rules.query_count,
                                        agents.rules.evaluation_stop_phrases);
    if (problem.empty()) {
      return queries;
    }
    correction = "Your previous answer was rejected: " + problem + ". Output exactly " +
                 std::to_string(agents.rules.query_count) +
                 " numbered lines and avoid every term in the AVOID list.";
  }
  fail(ErrorKind::MalformedOutput, stage + ": " + problem);
}

std::vector<ItemAnswer> answer_checklist(std::string_view report_text, const assets::Dimension &dim,
                                         std::string_view database, const Agents &agents) {
  const auto &t = agents.prompts.get("eval_answers");
  const assets::Vars vars{{"dimension", dim.name},
                          {"definition", dim.definition},
                          {"conditions", dim.conditions},
                          {"article", std::string(database)},
                          {"summary", std::string(report_text)},
                          {"questions", format_questions(dim)}};
  const std::string stage = "eval.answers." + dim.name;
  const std::size_t n = dim.items.size();
  std::string correction;
  for (int attempt = 0; attempt < 2; ++attempt) {
    ChatRequest req{stage, "", assets::fill(t.user, vars)};
    if (!correction.empty()) {
      req.user += "\n\n" + correction;
    }
    const auto lines = parse_answer_lines(agents.chat.chat(req));
    std::map<int, std::string> by_index;
    bool duplicate = false;
    for (const auto &[k, v] : lines) {
      duplicate |= !by_index.emplace(k, v).second;
    }
    const bool aligned = !duplicate && by_index.size() == n && by_index.begin()->first == 1 &&
                         by_index.rbegin()->first == static_cast<int>(n);
    if (!aligned) {
      if (attempt == 1) {
        fail(ErrorKind::MalformedOutput, stage + ": got " + std::to_string(lines.size()) +
                                             " answers for " + std::to_string(n) + " questions");
      }
      correction = "Your previous answer did not contain exactly one line Q1 to Q" + std::to_string(n) +
                   ". Answer every question with yes or no, one line each.";
      continue;
    }
    std::vector<ItemAnswer> out;
    std::vector<int> unclear;
    for (std::size_t i = 0; i < n; ++i) {
      const auto yn = parse_yes_no(by_index[static_cast<int>(i + 1)]);
      ItemAnswer a;
      a.item_id = dim.items[i].id;
      a.yes = yn.value_or(false);
      a.defaulted = !yn.has_value();
      if (a.defaulted) {
        unclear.push_back(static_cast<int>(i + 1));
      }
      out.push_back(std::move(a));
    }
    if (unclear.empty() || attempt == 1) {
      for (int q : unclear) {
        log::warn(stage + ": Q" + std::to_string(q) + " has no yes/no answer; scored as no");
      }
      return out;
    }
    correction = "Some answers were neither yes nor no (Q" + std::to_string(unclear.front()) +
                 "). Answer every question with exactly yes or no.";
  }
  fail(ErrorKind::MalformedOutput, stage + ": unusable answers");
}

// --- pipeline --------------------------------------------------------------------------

EvaluationResult evaluate_report(const std::string &report_id, std::string_view report_text,
                                 const corpus::Document &target,
                                 const corpus::DocumentCatalog &catalog,
                                 const retrieval::Retriever *retriever,
                                 const ingest::Tokenizer &tokenizer,
                                 const assets::Checklist &checklist, const Agents &agents,
                                 const std::optional<validation::VerdictCounts> &verdicts,
                                 const EvaluationOptions &options) {
  EvaluationResult result;
  result.report_id = report_id;
  const std::string truncated(tokenizer.head(report_text, options.report_budget_tokens));
  const std::string main_text(tokenizer.head(target.cleaned_text, options.target_budget_tokens));
  for (const auto name : kDimensions) {
    const assets::Dimension &dim = checklist.dimension(name);
    DimensionResult dr;
    std::string database;
    if (dim.needs_rag) {
      if (retriever == nullptr) {
        fail(ErrorKind::InvalidInput, "dimension " + dim.name + " needs retrieval but no index is loaded");
      }
      dr.queries = generate_eval_queries(truncated, dim, agents);
      const auto merged = retrieval::union_contexts(retriever->retrieve_for_queries(dr.queries),
                                                    options.context_cap);
      database = "Main paper: " + target.meta.title + "\n" + main_text + "\n\nRelated papers:\n" +
                 generation::format_knowledge(merged, catalog);
    } else if (dim.name == "Effectiveness") {
      database = assets::report_template();
    }
    dr.answers = answer_checklist(report_text, dim, database, agents);
    std::vector<bool> yes;
    for (const auto &a : dr.answers) {
      yes.push_back(a.yes);
    }
    dr.score = score_dimension(dim.name, yes);
    if (dim.name == "Faithfulness") {
      result.metrics = compute_faithfulness_metrics(dim, yes, verdicts.value_or(validation::VerdictCounts{}));
      if (!verdicts) {
        // CA needs validation artifacts; without them the vacuous value is reported.
        log::warn("evaluate: no verdicts supplied; CA reported as vacuous");
      }
    }
    result.dimensions.push_back(std::move(dr));
  }
  std::vector<DimensionScore> scores;
  for (const auto &d : result.dimensions) {
    scores.push_back(d.score);
  }
  result.overall = aggregate_overall(scores);
  return result;
}

json to_json(const EvaluationResult &r) {
  json dims = json::array();
  for (const auto &d : r.dimensions) {
    json answers = json::array();
    for (const auto &a : d.answers) {
      answers.push_back({{"item_id", a.item_id}, {"answer", a.yes ? "yes" : "no"}, {"defaulted", a.defaulted}});
    }
    dims.push_back({{"dimension", d.score.dimension},
                    {"yes_count", d.score.yes_count},
                    {"total", d.score.total},
                    {"score", d.score.score},
                    {"queries", d.queries},
                    {"answers", std::move(answers)}});
  }
  json j{{"report_id", r.report_id}, {"dimensions", std::move(dims)}, {"overall", r.overall}};
  if (r.metrics) {
    j["metrics"] = {{"tf", r.metrics->tf},
                    {"cf", r.metrics->cf},
                    {"ca", r.metrics->ca},
                    {"no_citations", r.metrics->no_citations}};
  } else {
    j["metrics"] = nullptr;
  }
  return j;
}

EvaluationResult evaluation_from_json(const json &j) {
  EvaluationResult r;
  try {
    r.report_id = j.at("report_id").get<std::string>();
    r.overall = j.at("overall").get<double>();
    for (const auto &d : j.at("dimensions")) {
      DimensionResult dr;
      dr.score.dimension = d.at("dimension").get<std::string>();
      dr.score.yes_count = d.at("yes_count").get<std::size_t>();
      dr.score.total = d.at("total").get<std::size_t>();
      dr.score.score = d.at("score").get<double>();
      dr.queries = d.value("queries", std::vector<std::string>{});
      for (const auto &a : d.value("answers", json::array())) {
        dr.answers.push_back({a.at("item_id").get<std::string>(), a.at("answer").get<std::string>() == "yes",
                              a.value("defaulted", false)});
      }
      r.dimensions.push_back(std::move(dr));
    }
    if (j.contains("metrics") && !j.at("metrics").is_null()) {
      const auto &m = j.at("metrics");
      r.metrics = FaithfulnessMetrics{m.at("tf").get<double>(), m.at("cf").get<double>(),
                                      m.at("ca").get<double>(), m.value("no_citations", false)};
    }
  } catch (const json::exception &e) {
    fail(ErrorKind::InvalidInput, std::string("malformed evaluation result: ") + e.what());
  }
  return r;
}

Aggregate aggregate_results(const std::vector<EvaluationResult> &results) {
  if (results.empty()) {
    fail(ErrorKind::InvalidInput, "no evaluation results to aggregate");
  }
  Aggregate a;
  a.reports = results.size();
  for (const auto name : kDimensions) {
    DimensionScore pooled;
    pooled.dimension = std::string(name);
    double macro = 0.0;
    for (const auto &r : results) {
      const auto it = std::find_if(r.dimensions.begin(), r.dimensions.end(),
                                   [&](const DimensionResult &d) { return d.score.dimension == name; });
      if (it == r.dimensions.end()) {
        fail(ErrorKind::MissingDimension, r.report_id + " lacks dimension " + std::string(name));
      }
      pooled.yes_count += it->score.yes_count;
      pooled.total += it->score.total;
      macro += it->score.score;
    }
    if (pooled.total == 0) {
      fail(ErrorKind::EmptyAnswers, "no answers for dimension " + std::string(name));
    }
    pooled.score = 10.0 * static_cast<double>(pooled.yes_count) / static_cast<double>(pooled.total);
    a.micro.push_back(pooled);
    a.macro.push_back(macro / static_cast<double>(results.size()));
  }
  a.overall_micro = aggregate_overall(a.micro);
  double sum = 0.0;
  for (double m : a.macro) {
    sum += m;
  }
  a.overall_macro = sum / static_cast<double>(a.macro.size());
  return a;
}

json to_json(const Aggregate &a) {
  json dims = json::array();
  for (std::size_t i = 0; i < a.micro.size(); ++i) {
    dims.push_back({{"dimension", a.micro[i].dimension}, {"macro", a.macro[i]}, {"micro", a.micro[i].score}});
  }
  return {{"reports", a.reports},
          {"dimensions", std::move(dims)},
          {"overall_macro", a.overall_macro},
          {"overall_micro", a.overall_micro}};
}

// --- cross-validation ----------------------------------------------------------------

namespace {

void check_matrix(const ScoreMatrix &m) {
  if (m.models.size() < 2) {
    fail(ErrorKind::IncompleteMatrix, "cross-validation needs at least 2 models");
  }
  if (m.papers.empty() || m.scores.empty()) {
    fail(ErrorKind::IncompleteMatrix, "cross-validation needs at least 1 paper");
  }
  if (m.scores.size() != m.papers.size()) {
    fail(ErrorKind::IncompleteMatrix, "row count differs from paper count");
  }
  for (std::size_t p = 0; p < m.scores.size(); ++p) {
    if (m.scores[p].size() != m.models.size()) {
      fail(ErrorKind::IncompleteMatrix, "row for " + m.papers[p] + " has " +
                                            std::to_string(m.scores[p].size()) + " cells, expected " +
                                            std::to_string(m.models.size()));
    }
    for (double v : m.scores[p]) {
      if (!std::isfinite(v)) {
        fail(ErrorKind::IncompleteMatrix, "non-finite score for " + m.papers[p]);
      }
    }
  }
}

std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(text::trim(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  out.push_back(text::trim(cell));
  return out;
}

} // namespace

ScoreMatrix parse_matrix_csv(std::string_view csv) {
  ScoreMatrix m;
  bool header = true;
  for (const auto &line : text::split_lines(csv)) {
    if (text::trim(line).empty()) {
      continue;
    }
    const auto cells = split_csv_line(line);
    if (header) {
      m.models.assign(cells.begin() + 1, cells.end());
      header = false;
      continue;
    }
    m.papers.push_back(cells.front());
    std::vector<double> row;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      if (cells[i].empty()) {
        fail(ErrorKind::IncompleteMatrix, "missing cell for " + cells.front());
      }
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cells[i], &used));
        if (used != cells[i].size()) {
          throw std::invalid_argument(cells[i]);
        }
      } catch (const std::exception &) {
        fail(ErrorKind::IncompleteMatrix, "non-numeric cell '" + cells[i] + "' for " + cells.front());
      }
    }
    m.scores.push_back(std::move(row));
  }
  check_matrix(m);
  return m;
}

ScoreMatrix parse_matrix_json(const json &j) {
  ScoreMatrix m;
  try {
    m.models = j.at("models").get<std::vector<std::string>>();
    m.papers = j.at("papers").get<std::vector<std::string>>();
    for (const auto &row : j.at("scores")) {
      std::vector<double> r;
      for (const auto &v : row) {
        if (!v.is_number()) {
          fail(ErrorKind::IncompleteMatrix, "non-numeric score cell");
        }
        r.push_back(v.get<double>());
      }
      m.scores.push_back(std::move(r));
    }
  } catch (const json::exception &e) {
    fail(ErrorKind::IncompleteMatrix, std::string("malformed score matrix: ") + e.what());
  }
  check_matrix(m);
  return m;
}

ScoreMatrix load_matrix(const std::filesystem::path &path) {
  const std::string content = text::read_file(path);
  if (path.extension() == ".json") {
    try {
      return parse_matrix_json(json::parse(content));
    } catch (const json::parse_error &e) {
      fail(ErrorKind::IncompleteMatrix, std::string("invalid JSON: ") + e.what());
    }
  }
  return parse_matrix_csv(content);
}

std::vector<ModelError> cross_validate(const ScoreMatrix &matrix, Strategy strategy) {
  check_matrix(matrix);
  const std::size_t n = matrix.models.size();
  std::vector<ModelError> out;
  for (std::size_t k = 0; k < n; ++k) {
    ModelError e;
    e.model = matrix.models[k];
    for (const auto &row : matrix.scores) {
      double sum = 0.0;
      for (double v : row) {
        sum += v;
      }
      const double gt = strategy == Strategy::all_models
                            ? sum / static_cast<double>(n)
                            : (sum - row[k]) / static_cast<double>(n - 1);
      const double d = row[k] - gt;
      e.mae += std::fabs(d);
      e.mse += d * d;
    }
    e.mae /= static_cast<double>(matrix.scores.size());
    e.mse /= static_cast<double>(matrix.scores.size());
    out.push_back(std::move(e));
  }
  return out;
}

json to_json(const std::vector<ModelError> &errors, Strategy strategy) {
  json rows = json::array();
  for (const auto &e : errors) {
    rows.push_back({{"model", e.model}, {"mae", e.mae}, {"mse", e.mse}});
  }
  return {{"strategy", strategy == Strategy::all_models ? "all_models" : "leave_one_out"},
          {"models", std::move(rows)}};
}

} // namespace novelty::evaluation
