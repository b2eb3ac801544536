#pragma once

#include "novelty/config.hpp"
#include "novelty/error.hpp"
#include "novelty/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace novelty::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kCapacity = 3,
  kTargetNotFound = 4,
  kProviderUnavailable = 5,
  kMalformedOutput = 6,
  kStructureViolation = 7,
  kBudgetExceeded = 8,
  kInvalidInput = 9,
};

int exit_code(ErrorKind kind);

// Per-invocation settings layered over the config file.
struct Overrides {
  std::optional<std::filesystem::path> offline_dir;
  std::optional<std::size_t> capacity;
  std::optional<std::size_t> k_final;
  std::optional<std::filesystem::path> mock_transcript;
  std::optional<bool> fail_closed;
  std::optional<std::filesystem::path> run_dir;
};

config::RunConfig apply_overrides(config::RunConfig config, const Overrides &o);

// <run_dir>/<safe target id>/{corpus,indexes,reports,validation,eval,transcripts}
struct PaperDir {
  std::filesystem::path root;
  std::filesystem::path corpus() const { return root / "corpus"; }
  std::filesystem::path indexes() const { return root / "indexes"; }
  std::filesystem::path reports() const { return root / "reports"; }
  std::filesystem::path validation() const { return root / "validation"; }
  std::filesystem::path eval() const { return root / "eval"; }
  std::filesystem::path transcripts() const { return root / "transcripts"; }
};

// Each command writes its outputs under the paper directory and returns the
// machine-readable summary it also stores as <stage dir>/summary.json.
nlohmann::json cmd_build_db(const std::string &title_or_id, const config::RunConfig &config,
                            const std::optional<std::filesystem::path> &mock_transcript = {});

nlohmann::json cmd_generate(const PaperDir &paper, const config::RunConfig &config,
                            const std::optional<std::filesystem::path> &mock_transcript);

// `report` defaults to reports/report.md.
nlohmann::json cmd_validate(const PaperDir &paper, const config::RunConfig &config,
                            const std::optional<std::filesystem::path> &report,
                            const std::optional<std::filesystem::path> &mock_transcript);

// `report` defaults to validation/report.md, else reports/report.md. CA uses
// validation/verdicts.json when present.
nlohmann::json cmd_evaluate(const PaperDir &paper, const config::RunConfig &config,
                            const std::optional<std::filesystem::path> &report,
                            const std::optional<std::filesystem::path> &mock_transcript);

nlohmann::json cmd_cross_validate(const std::filesystem::path &matrix, evaluation::Strategy strategy,
                                  const std::optional<std::filesystem::path> &out);

nlohmann::json cmd_aggregate(const std::vector<std::filesystem::path> &results,
                             const std::optional<std::filesystem::path> &out);

// Full command line entry point. Errors are printed to stderr and mapped to
// exit codes; nothing throws.
int run(int argc, char **argv);

} // namespace novelty::cli
