#pragma once

#include "novelty/gateway.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace novelty::config {

// Every tunable of a run. Loaded from an INI-style key = value file; keys in
// a [section] are addressed as "section.key".
struct RunConfig {
  std::filesystem::path run_dir = "runs";
  std::filesystem::path offline_dir; // metadata.json + texts; empty: use the HTTP provider
  std::filesystem::path text_dir;    // full texts; defaults to offline_dir
  std::filesystem::path asset_dir;   // prompts, checklist; defaults to the built-in assets
  std::string scholarly_base_url = "https://api.semanticscholar.org/graph/v1";
  std::string scholarly_api_key_env = "S2_API_KEY";

  std::size_t capacity = 200;
  std::size_t chunk_tokens = 512;
  std::size_t query_count = 6;
  std::size_t max_points = 5;
  std::size_t n_recall = 50;
  double fusion_weight = 0.5;
  std::size_t k_final = 7;
  bool rerank_fallback = true;
  std::size_t context_cap = 42;
  std::size_t max_parallel = 4;

  std::size_t target_budget_tokens = 60000;
  std::size_t source_budget_tokens = 60000;
  std::size_t report_budget_tokens = 20000;
  bool fail_closed = false;
  bool polish = true;

  std::string embedder = "hashing"; // hashing | http
  std::size_t hashing_dim = 256;
  std::string reranker = "lexical"; // lexical | http | none
  std::string api_key_env = "OPENAI_API_KEY";
  gateway::GatewayConfig gateway;

  // Throws InvalidConfig on out-of-range values.
  void validate() const;
};

std::vector<std::string> known_keys();

// Sets one key from its textual value. Unknown keys and unparseable values
// raise InvalidConfig.
void apply(RunConfig &config, const std::string &key, const std::string &value);

RunConfig parse_config(const std::string &text);
// Missing or unreadable file: InvalidConfig.
RunConfig load_config(const std::filesystem::path &path);

std::map<std::string, std::string> to_map(const RunConfig &config);

} // namespace novelty::config
