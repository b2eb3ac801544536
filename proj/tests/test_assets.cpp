#include "novelty/assets.hpp"
#include "novelty/text.hpp"

#include "support.hpp"

using namespace novelty;
using namespace novelty::assets;

TEST_CASE("fill substitutes named variables once") {
  CHECK(fill("Hi {name}, {name}!", {{"name", "Ann"}}) == "Hi Ann, Ann!");
  // Literal JSON braces survive.
  CHECK(fill(R"({"a": {x}})", {{"x", "1"}}) == R"({"a": 1})");
  // Substituted text is not rescanned.
  CHECK(fill("{a}{b}", {{"a", "{b}"}, {"b", "B"}}) == "{b}B");
  CHECK(test_support::error_kind_of([] { fill("no vars", {{"x", "1"}}); }) == ErrorKind::InvalidInput);
}

TEST_CASE("the shipped checklist has 69 items across five dimensions") {
  const auto c = Checklist::load_default();
  CHECK(c.item_count() == 69);
  const std::vector<std::pair<std::string, std::size_t>> expected{
      {"Fluency", 11}, {"Effectiveness", 13}, {"Completeness", 18}, {"Faithfulness", 14}, {"Depth", 13}};
  REQUIRE(c.dimensions().size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(c.dimensions()[i].name == expected[i].first);
    CHECK(c.dimensions()[i].items.size() == expected[i].second);
    CHECK_FALSE(c.dimensions()[i].definition.empty());
  }
  CHECK_FALSE(c.dimension("Fluency").needs_rag);
  CHECK_FALSE(c.dimension("Effectiveness").needs_rag);
  CHECK(c.dimension("Completeness").needs_rag);
  CHECK(c.dimension("Faithfulness").needs_rag);
  CHECK(c.dimension("Depth").needs_rag);

  std::size_t target = 0;
  std::size_t cited = 0;
  for (const auto &item : c.dimension("Faithfulness").items) {
    REQUIRE(item.faithfulness_class.has_value());
    (*item.faithfulness_class == FaithClass::target ? target : cited)++;
  }
  CHECK(target == 7);
  CHECK(cited == 7);
  CHECK(test_support::error_kind_of([&] { c.dimension("Style"); }) == ErrorKind::MissingDimension);
}

TEST_CASE("every prompt template loads") {
  PromptLibrary lib;
  for (const char *name : {"summary", "extraction", "queries", "comparison", "novelty_summary", "validation_extract",
                           "validation_dedup", "validation_verify", "validation_correct", "polish", "eval_queries",
                           "eval_answers", "baseline"}) {
    CHECK_FALSE(lib.get(name).user.empty());
  }
  CHECK_FALSE(lib.get("comparison").system.empty());
  CHECK(test_support::error_kind_of([&] { lib.get("missing"); }) == ErrorKind::Io);
}

TEST_CASE("stop phrases match whole words case-insensitively") {
  const auto rules = QueryRules::load_default();
  CHECK(rules.query_count == 6);
  CHECK(find_stop_phrase("How does routing work", rules.generation_stop_phrases) == std::optional<std::string>("how"));
  CHECK(find_stop_phrase("graph routing in This Paper", rules.generation_stop_phrases).has_value());
  // "itself" and "showcase" do not contain whole-word stop phrases.
  CHECK_FALSE(find_stop_phrase("routing itself showcase", rules.generation_stop_phrases).has_value());
  CHECK_FALSE(find_stop_phrase("sparse expert routing for dynamic graphs", rules.generation_stop_phrases));
  // "unique" is only forbidden during generation.
  CHECK(find_stop_phrase("unique experts", rules.generation_stop_phrases).has_value());
  CHECK_FALSE(find_stop_phrase("unique experts", rules.evaluation_stop_phrases).has_value());
  CHECK(find_stop_phrase("related work on graphs", rules.evaluation_stop_phrases).has_value());
}

TEST_CASE("report template lists the three sections") {
  const std::string t = report_template();
  CHECK(t.find("Paper Content Summary") != std::string::npos);
  CHECK(t.find("Point-wise Novelty Analysis") != std::string::npos);
  CHECK(t.find("Novelty Summary") != std::string::npos);
}
