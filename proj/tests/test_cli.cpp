#include "novelty/cli.hpp"
#include "novelty/text.hpp"

#include "support.hpp"

#include <fstream>

using namespace novelty;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kTarget = "T1";

config::RunConfig offline_config(const fs::path &run_dir) {
  auto c = config::load_config(test_support::fixture_dir() / "offline.ini");
  c.offline_dir = test_support::fixture_dir() / "offline";
  c.run_dir = run_dir;
  return c;
}

fs::path transcript(const std::string &name) { return test_support::fixture_dir() / "transcripts" / name; }

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "novelty");
  std::vector<char *> argv;
  for (auto &a : args) {
    argv.push_back(a.data());
  }
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

struct BuiltRun {
  test_support::TempDir tmp;
  config::RunConfig config = offline_config(tmp.path() / "runs");
  json build = cli::cmd_build_db(kTarget, config);
  cli::PaperDir paper{build.at("paper_dir").get<std::string>()};
};

} // namespace

TEST_CASE("config parsing") {
  const auto c = config::parse_config("# comment\ncapacity = 12\nfail_closed = true\n[gateway]\nchat_model = m\n");
  CHECK(c.capacity == 12);
  CHECK(c.fail_closed);
  CHECK(c.gateway.chat_model == "m");
  CHECK(test_support::error_kind_of([] { config::parse_config("no_such_key = 1\n"); }) == ErrorKind::InvalidConfig);
  CHECK(test_support::error_kind_of([] { config::parse_config("capacity = lots\n"); }) == ErrorKind::InvalidConfig);
  CHECK(test_support::error_kind_of([] { config::parse_config("k_final = 60\n"); }) == ErrorKind::InvalidConfig);
  CHECK(test_support::error_kind_of([] { config::parse_config("max_points = 7\n"); }) == ErrorKind::InvalidConfig);
  CHECK(test_support::error_kind_of([] { config::load_config("/nonexistent/x.ini"); }) == ErrorKind::InvalidConfig);
  const auto m = config::to_map(config::RunConfig{});
  CHECK(m.at("chunk_tokens") == "512");
  for (const auto &k : config::known_keys()) {
    CHECK(m.count(k) == 1);
  }
}

TEST_CASE("error kinds map to stable exit codes") {
  CHECK(cli::exit_code(ErrorKind::InvalidConfig) == 2);
  CHECK(cli::exit_code(ErrorKind::CapacityTooSmall) == 3);
  CHECK(cli::exit_code(ErrorKind::TargetNotFound) == 4);
  CHECK(cli::exit_code(ErrorKind::ProviderUnavailable) == 5);
  CHECK(cli::exit_code(ErrorKind::MalformedOutput) == 6);
  CHECK(cli::exit_code(ErrorKind::StructureViolation) == 7);
  CHECK(cli::exit_code(ErrorKind::BudgetExceeded) == 8);
  CHECK(cli::exit_code(ErrorKind::IncompleteMatrix) == 9);
  CHECK(cli::exit_code(ErrorKind::Io) == 1);
}

TEST_CASE("command line exit codes") {
  test_support::TempDir tmp;
  const std::string ini = (test_support::fixture_dir() / "offline.ini").string();
  const std::string offline = (test_support::fixture_dir() / "offline").string();
  const std::string runs = (tmp.path() / "runs").string();
  CHECK(run_cli({"build-db", kTarget}) == 2);
  CHECK(run_cli({"--config", "/nonexistent.ini", "build-db", kTarget}) == 2);
  CHECK(run_cli({"--config", ini, "--offline-dir", offline, "--run-dir", runs, "--capacity", "3", "build-db", kTarget}) == 3);
  CHECK(run_cli({"--config", ini, "--offline-dir", offline, "--run-dir", runs, "build-db", "No Such Paper"}) == 4);
  CHECK(run_cli({"--config", ini, "--offline-dir", offline, "--run-dir", runs, "build-db", kTarget}) == 0);
  // Replay transcript without responses for the needed stages.
  CHECK(run_cli({"--config", ini, "--run-dir", runs, "--mock-transcript",
                 transcript("evaluate_all_yes.jsonl").string(), "generate", kTarget}) == 5);
  CHECK(fs::exists(fs::path(runs) / kTarget / "transcripts" / "generate.jsonl"));
}

TEST_CASE("build-db writes the manifest, corpus and indexes") {
  BuiltRun run;
  CHECK(run.build["first_order"] == 6);
  CHECK(run.build["entries"] == 14);
  CHECK(run.build["target_ingest"] == "resolved");
  CHECK(run.build["ingest"]["resolved"] == 12);
  CHECK(run.build["ingest"]["text_missing"] == 2);
  CHECK(run.build["ingest"]["extraction_failed"] == 0);
  const auto manifest = json::parse(text::read_file(run.paper.corpus() / "manifest.json"));
  const auto golden = json::parse(text::read_file(test_support::fixture_dir() / "golden" / "manifest.json"));
  CHECK(manifest == golden);
  for (const char *f : {"chunks.jsonl", "sparse.json", "meta.json"}) {
    CHECK(fs::exists(run.paper.indexes() / f));
  }
}

TEST_CASE("mock generation reproduces the golden report") {
  BuiltRun run;
  const auto summary = cli::cmd_generate(run.paper, run.config, transcript("generate.jsonl"));
  CHECK(summary["points"] == 3);
  CHECK(summary["score"] == 3);
  CHECK(summary["structure_violations"].empty());
  const std::string md = text::read_file(run.paper.reports() / "report.md");
  CHECK(md == text::read_file(test_support::fixture_dir() / "golden" / "report.md"));
  const auto sidecar = json::parse(text::read_file(run.paper.reports() / "report.json"));
  CHECK(sidecar["score"] == 3);
  CHECK(sidecar["analyses"].size() == 3);
  CHECK(fs::exists(run.paper.transcripts() / "generate.jsonl"));
}

TEST_CASE("validate and evaluate over the mock run") {
  BuiltRun run;
  cli::cmd_generate(run.paper, run.config, transcript("generate.jsonl"));
  const std::string golden = text::read_file(run.paper.reports() / "report.md");

  SUBCASE("all-correct verdicts leave the report unchanged") {
    const auto s = cli::cmd_validate(run.paper, run.config, std::nullopt, transcript("validate_correct.jsonl"));
    CHECK(s["incorrect"] == 0);
    CHECK(s["changed_lines"] == 0);
    CHECK(text::read_file(run.paper.validation() / "report.md") == golden);
  }
  SUBCASE("one incorrect verdict changes one sentence") {
    const auto s = cli::cmd_validate(run.paper, run.config, std::nullopt, transcript("validate_incorrect.jsonl"));
    CHECK(s["claims_verified"] == 5);
    CHECK(s["incorrect"] == 1);
    CHECK(s["changed_lines"] == 2);
    const std::string out = text::read_file(run.paper.validation() / "report.md");
    CHECK(report::references_section(out) == report::references_section(golden));

    const auto e = cli::cmd_evaluate(run.paper, run.config, std::nullopt, transcript("evaluate_all_yes.jsonl"));
    CHECK(e["overall"].get<double>() == doctest::Approx(10.0));
    CHECK(e["metrics"]["tf"].get<double>() == doctest::Approx(100.0));
    CHECK(e["metrics"]["cf"].get<double>() == doctest::Approx(100.0));
    CHECK(e["metrics"]["ca"].get<double>() == doctest::Approx(80.0));
    const auto result = json::parse(text::read_file(run.paper.eval() / "result.json"));
    CHECK(result["dimensions"][0]["queries"].empty()); // Fluency needs no retrieval
    CHECK(result["dimensions"][2]["queries"].size() == 6);

    const auto agg = cli::cmd_aggregate({run.paper.eval() / "result.json", run.paper.eval() / "result.json"},
                                        run.paper.eval() / "aggregate.json");
    CHECK(agg["reports"] == 2);
    CHECK(agg["overall_macro"].get<double>() == doctest::Approx(10.0));
  }
}

TEST_CASE("cross-validate command writes the error table") {
  test_support::TempDir tmp;
  std::ofstream(tmp.path() / "m.csv") << "paper,A,B\np1,8,6\np2,5,9\n";
  const auto j = cli::cmd_cross_validate(tmp.path() / "m.csv", evaluation::Strategy::leave_one_out,
                                         tmp.path() / "out.json");
  CHECK(j["models"][0]["mae"] == 3.0);
  CHECK(j["models"][0]["mse"] == 10.0);
  CHECK(json::parse(text::read_file(tmp.path() / "out.json")) == j);
  std::ofstream(tmp.path() / "bad.csv") << "paper,A,B\np1,8,\n";
  CHECK(run_cli({"cross-validate", (tmp.path() / "bad.csv").string()}) == 9);
  CHECK(run_cli({"cross-validate", (tmp.path() / "m.csv").string(), "--strategy", "all_models"}) == 0);
}
