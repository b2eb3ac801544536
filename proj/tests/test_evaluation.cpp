#include "novelty/evaluation.hpp"

#include "support.hpp"

#include <cmath>
#include <fstream>

using namespace novelty;
using namespace novelty::evaluation;

namespace {

struct Fixture {
  test_support::ScriptedChat chat;
  assets::PromptLibrary prompts;
  assets::QueryRules rules = assets::QueryRules::load_default();
  Agents agents{chat, prompts, rules};
};

std::vector<bool> answers_with(std::size_t yes, std::size_t total) {
  std::vector<bool> a(total, false);
  std::fill_n(a.begin(), yes, true);
  return a;
}

assets::Dimension faith_dim(std::size_t target, std::size_t cited) {
  assets::Dimension d;
  d.name = "Faithfulness";
  for (std::size_t i = 0; i < target + cited; ++i) {
    assets::ChecklistItem item;
    item.id = "F" + std::to_string(i);
    item.faithfulness_class = i < target ? assets::FaithClass::target : assets::FaithClass::cited;
    d.items.push_back(item);
  }
  return d;
}

std::vector<DimensionScore> row(std::initializer_list<double> completeness_depth_eff_faith_flu) {
  // Table column order: Completeness, Depth, Effectiveness, Faithfulness, Fluency.
  static const char *names[] = {"Completeness", "Depth", "Effectiveness", "Faithfulness", "Fluency"};
  std::vector<DimensionScore> out;
  std::size_t i = 0;
  for (double v : completeness_depth_eff_faith_flu) {
    DimensionScore s;
    s.dimension = names[i++];
    s.score = v;
    out.push_back(s);
  }
  return out;
}

std::string yes_lines(std::size_t n, const std::string &answer = "yes") {
  std::string s;
  for (std::size_t i = 1; i <= n; ++i) {
    s += "Q" + std::to_string(i) + ": " + answer + "\n";
  }
  return s;
}

EvaluationResult result_with(const std::string &id, const std::vector<std::pair<std::size_t, std::size_t>> &yes_total) {
  EvaluationResult r;
  r.report_id = id;
  for (std::size_t i = 0; i < kDimensions.size(); ++i) {
    DimensionResult d;
    d.score = score_dimension(std::string(kDimensions[i]), answers_with(yes_total[i].first, yes_total[i].second));
    r.dimensions.push_back(d);
  }
  return r;
}

} // namespace

TEST_CASE("dimension score is ten times the yes proportion") {
  CHECK(score_dimension("X", answers_with(69, 69)).score == 10.0);
  CHECK(score_dimension("X", answers_with(0, 69)).score == 0.0);
  CHECK(score_dimension("X", answers_with(42, 69)).score == doctest::Approx(6.0870).epsilon(1e-5));
  CHECK(score_dimension("X", answers_with(7, 14)).yes_count == 7);
  CHECK(test_support::error_kind_of([] { score_dimension("X", {}); }) == ErrorKind::EmptyAnswers);
}

TEST_CASE("overall is the unweighted mean and reproduces the published rows") {
  const std::vector<std::pair<std::vector<DimensionScore>, double>> table{
      {row({6.23, 7.63, 9.21, 5.50, 9.96}), 7.71}, {row({8.32, 8.01, 9.18, 5.89, 10.00}), 8.28},
      {row({6.88, 8.56, 9.21, 5.74, 8.30}), 7.74}, {row({8.34, 8.40, 9.20, 6.75, 9.66}), 8.47},
      {row({7.41, 9.09, 9.25, 7.54, 9.42}), 8.54}, {row({7.59, 9.14, 9.23, 6.43, 9.82}), 8.44},
      {row({9.67, 9.55, 9.09, 8.40, 9.93}), 9.33},
  };
  for (const auto &[dims, overall] : table) {
    CHECK(std::fabs(aggregate_overall(dims) - overall) <= 0.005);
  }
  auto missing = row({1, 2, 3, 4, 5});
  missing.pop_back();
  CHECK(test_support::error_kind_of([&] { aggregate_overall(missing); }) == ErrorKind::MissingDimension);
}

TEST_CASE("faithfulness metrics") {
  const auto dim = faith_dim(4, 6);
  std::vector<bool> answers{true, true, true, true, true, false, true, false, true, false};
  auto m = compute_faithfulness_metrics(dim, answers, {10, 1});
  CHECK(m.tf == 100.0);
  CHECK(m.cf == doctest::Approx(50.0));
  CHECK(m.ca == doctest::Approx(90.0));
  CHECK_FALSE(m.no_citations);

  m = compute_faithfulness_metrics(dim, answers, {0, 0});
  CHECK(m.ca == 100.0);
  CHECK(m.no_citations);

  auto unlabeled = dim;
  unlabeled.items[2].faithfulness_class.reset();
  CHECK(test_support::error_kind_of([&] { compute_faithfulness_metrics(unlabeled, answers, {}); }) ==
        ErrorKind::MissingClassAnnotations);
  CHECK(test_support::error_kind_of([&] { compute_faithfulness_metrics(faith_dim(10, 0), answers, {}); }) ==
        ErrorKind::MissingClassAnnotations);
  CHECK(test_support::error_kind_of([&] { compute_faithfulness_metrics(dim, {true}, {}); }) == ErrorKind::InvalidInput);

  // Shipped checklist: every item answered yes.
  const auto checklist = assets::Checklist::load_default();
  const auto &shipped = checklist.dimension("Faithfulness");
  m = compute_faithfulness_metrics(shipped, std::vector<bool>(shipped.items.size(), true), {5, 1});
  CHECK(m.tf == 100.0);
  CHECK(m.cf == 100.0);
  CHECK(m.ca == doctest::Approx(80.0));
}

TEST_CASE("answer parsing") {
  const auto lines = parse_answer_lines("Q1: yes\n**Q2**: No\n- Q3) [Yes] because\nnoise\nQ4. maybe");
  REQUIRE(lines.size() == 4);
  CHECK(lines[2].first == 3);
  CHECK(parse_yes_no(lines[0].second) == true);
  CHECK(parse_yes_no(lines[1].second) == false);
  CHECK(parse_yes_no(lines[2].second) == true);
  CHECK_FALSE(parse_yes_no(lines[3].second).has_value());
  CHECK_FALSE(parse_yes_no("nope").has_value());
  CHECK_FALSE(parse_yes_no("yesterday").has_value());
}

TEST_CASE("unparseable answers are retried once, then scored as no") {
  const auto checklist = assets::Checklist::load_default();
  const auto &dim = checklist.dimension("Fluency");
  std::string maybe = yes_lines(dim.items.size());
  maybe.replace(maybe.find("Q3: yes"), 7, "Q3: maybe");

  Fixture f;
  f.chat.on("eval.answers.Fluency", maybe).on("eval.answers.Fluency", maybe);
  test_support::LogCapture logs;
  const auto answers = answer_checklist("report", dim, "", f.agents);
  REQUIRE(answers.size() == dim.items.size());
  CHECK_FALSE(answers[2].yes);
  CHECK(answers[2].defaulted);
  CHECK(answers[0].yes);
  CHECK(f.chat.count("eval.answers.Fluency") == 2);
  CHECK(logs.contains("Q3"));

  Fixture g;
  g.chat.on("eval.answers.Fluency", maybe).on("eval.answers.Fluency", yes_lines(dim.items.size()));
  const auto fixed = answer_checklist("report", dim, "", g.agents);
  CHECK(fixed[2].yes);
  CHECK_FALSE(fixed[2].defaulted);
}

TEST_CASE("answer count mismatch is malformed after one retry") {
  const auto checklist = assets::Checklist::load_default();
  const auto &dim = checklist.dimension("Depth");
  Fixture f;
  f.chat.on("eval.answers.Depth", yes_lines(12)).on("eval.answers.Depth", yes_lines(14));
  CHECK(test_support::error_kind_of([&] { answer_checklist("r", dim, "db", f.agents); }) == ErrorKind::MalformedOutput);

  Fixture g;
  g.chat.on("eval.answers.Depth", yes_lines(12)).on("eval.answers.Depth", yes_lines(13, "no"));
  const auto answers = answer_checklist("r", dim, "db", g.agents);
  CHECK(answers.size() == 13);
  CHECK(g.chat.requests()[0].user.find("Q13: ") != std::string::npos);
  CHECK(g.chat.requests()[0].user.find("db") != std::string::npos);
}

TEST_CASE("evaluation queries avoid forbidden terms") {
  const auto checklist = assets::Checklist::load_default();
  const auto &dim = checklist.dimension("Depth");
  const std::string good = "1. expert routing\n2. node memory\n3. load balance\n4. link prediction\n5. sparse gates\n6. event streams";
  Fixture f;
  f.chat.on("eval.queries.Depth", "1. how does the report compare\n2. a\n3. b\n4. c\n5. d\n6. e")
      .on("eval.queries.Depth", good);
  const auto q = generate_eval_queries("report", dim, f.agents);
  CHECK(q.size() == 6);
  CHECK(q[0] == "expert routing");
  CHECK(f.chat.count("eval.queries.Depth") == 2);
  CHECK(f.chat.requests()[1].user.find("rejected") != std::string::npos);
}

TEST_CASE("results round-trip and aggregate in both modes") {
  const auto a = result_with("a", {{11, 11}, {13, 13}, {9, 18}, {7, 14}, {13, 13}});
  const auto b = result_with("b", {{0, 11}, {13, 13}, {18, 18}, {14, 14}, {0, 13}});
  auto b2 = b;
  b2.dimensions[2].score = score_dimension("Completeness", answers_with(1, 2));

  const auto back = evaluation_from_json(to_json(a));
  CHECK(back.report_id == "a");
  CHECK(back.dimensions[2].score.score == 5.0);

  const auto agg = aggregate_results({a, b2});
  CHECK(agg.reports == 2);
  // Completeness: macro mean(5, 5) = 5; micro (9 + 1) / (18 + 2) = 0.5.
  CHECK(agg.macro[2] == doctest::Approx(5.0));
  CHECK(agg.micro[2].score == doctest::Approx(5.0));
  // Fluency: macro mean(10, 0) = 5; micro 11/22 -> 5.
  CHECK(agg.macro[0] == doctest::Approx(5.0));
  // Faithfulness: macro mean(5, 10) = 7.5; micro 21/28 = 7.5.
  CHECK(agg.macro[3] == doctest::Approx(7.5));
  auto skewed = b;
  skewed.dimensions[3].score = score_dimension("Faithfulness", answers_with(1, 1));
  const auto agg2 = aggregate_results({a, skewed});
  // macro mean(5, 10) = 7.5, micro 8/15.
  CHECK(agg2.macro[3] == doctest::Approx(7.5));
  CHECK(agg2.micro[3].score == doctest::Approx(80.0 / 15.0));
  CHECK(test_support::error_kind_of([] { aggregate_results({}); }) == ErrorKind::InvalidInput);
}

TEST_CASE("cross-validation on hand-computed matrices") {
  ScoreMatrix m{{"A", "B"}, {"p1", "p2"}, {{8, 6}, {5, 9}}};
  const auto loo = cross_validate(m, Strategy::leave_one_out);
  REQUIRE(loo.size() == 2);
  CHECK(loo[0].mae == 3.0);
  CHECK(loo[0].mse == 10.0);
  CHECK(loo[1].mae == 3.0);
  const auto all = cross_validate(m, Strategy::all_models);
  CHECK(all[0].mae == 1.5);
  CHECK(all[0].mse == 2.5);

  ScoreMatrix same{{"A", "B", "C"}, {"p"}, {{7, 7, 7}}};
  for (const auto &e : cross_validate(same, Strategy::leave_one_out)) {
    CHECK(e.mae == 0.0);
    CHECK(e.mse == 0.0);
  }
  const auto j = to_json(loo, Strategy::leave_one_out);
  CHECK(j["strategy"] == "leave_one_out");
  CHECK(j["models"][1]["model"] == "B");
}

TEST_CASE("property: all-models errors are leave-one-out errors scaled by (N-1)/N") {
  auto rng = test_support::rng(31);
  std::uniform_real_distribution<double> score(0.0, 10.0);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 2 + rng() % 5;
    const std::size_t p = 1 + rng() % 8;
    ScoreMatrix m;
    for (std::size_t k = 0; k < n; ++k) {
      m.models.push_back("m" + std::to_string(k));
    }
    for (std::size_t i = 0; i < p; ++i) {
      m.papers.push_back("p" + std::to_string(i));
      std::vector<double> r;
      for (std::size_t k = 0; k < n; ++k) {
        r.push_back(score(rng));
      }
      m.scores.push_back(r);
    }
    const auto loo = cross_validate(m, Strategy::leave_one_out);
    const auto all = cross_validate(m, Strategy::all_models);
    const double f = static_cast<double>(n - 1) / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(all[k].mae == doctest::Approx(f * loo[k].mae).epsilon(1e-12));
      CHECK(all[k].mse == doctest::Approx(f * f * loo[k].mse).epsilon(1e-12));
    }
  }
}

TEST_CASE("score matrices load from CSV and JSON and reject gaps") {
  const auto m = parse_matrix_csv("paper,A,\"B, v2\"\np1,8,6\np2,5,9\n");
  CHECK(m.models == std::vector<std::string>{"A", "B, v2"});
  CHECK(m.scores[1][1] == 9.0);
  CHECK(test_support::error_kind_of([] { parse_matrix_csv("paper,A,B\np1,8,\n"); }) == ErrorKind::IncompleteMatrix);
  CHECK(test_support::error_kind_of([] { parse_matrix_csv("paper,A,B\np1,8\n"); }) == ErrorKind::IncompleteMatrix);
  CHECK(test_support::error_kind_of([] { parse_matrix_csv("paper,A,B\np1,8,x\n"); }) == ErrorKind::IncompleteMatrix);
  CHECK(test_support::error_kind_of([] { parse_matrix_csv("paper,A\np1,8\n"); }) == ErrorKind::IncompleteMatrix);
  CHECK(test_support::error_kind_of([] { parse_matrix_csv("paper,A,B\n"); }) == ErrorKind::IncompleteMatrix);

  const auto j = parse_matrix_json({{"models", {"A", "B"}}, {"papers", {"p"}}, {"scores", {{1.0, 2.0}}}});
  CHECK(j.scores[0][1] == 2.0);
  CHECK(test_support::error_kind_of([] {
          parse_matrix_json({{"models", {"A", "B"}}, {"papers", {"p"}}, {"scores", {{1.0, nullptr}}}});
        }) == ErrorKind::IncompleteMatrix);

  test_support::TempDir tmp;
  {
    std::ofstream(tmp.path() / "m.json") << R"({"models":["A","B"],"papers":["p"],"scores":[[3,4]]})";
    std::ofstream(tmp.path() / "m.csv") << "paper,A,B\np,3,4\n";
  }
  CHECK(load_matrix(tmp.path() / "m.json").scores == load_matrix(tmp.path() / "m.csv").scores);
}
