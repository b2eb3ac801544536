#include "novelty/config.hpp"

#include "novelty/error.hpp"
#include "novelty/text.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <functional>
#include <sstream>

namespace novelty::config {

namespace {

std::size_t to_size(const std::string &key, const std::string &v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    fail(ErrorKind::InvalidConfig, key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string &key, const std::string &v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) {
      return d;
    }
  } catch (const std::exception &) {
  }
  fail(ErrorKind::InvalidConfig, key + ": expected a number, got '" + v + "'");
}

bool to_bool(const std::string &key, const std::string &v) {
  const std::string s = text::to_lower(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") {
    return true;
  }
  if (s == "false" || s == "0" || s == "no" || s == "off") {
    return false;
  }
  fail(ErrorKind::InvalidConfig, key + ": expected a boolean, got '" + v + "'");
}

std::string fmt(double d) {
  std::ostringstream os;
  os << d;
  return os.str();
}

struct Field {
  std::function<void(RunConfig &, const std::string &, const std::string &)> set;
  std::function<std::string(const RunConfig &)> get;
};

#define SIZE_FIELD(key, member)                                                                       \
  {                                                                                                   \
    key, Field {                                                                                      \
      [](RunConfig &c, const std::string &k, const std::string &v) { c.member = to_size(k, v); },     \
          [](const RunConfig &c) { return std::to_string(c.member); }                                 \
    }                                                                                                 \
  }
#define STRING_FIELD(key, member)                                                                     \
  {                                                                                                   \
    key, Field {                                                                                      \
      [](RunConfig &c, const std::string &, const std::string &v) { c.member = v; },                  \
          [](const RunConfig &c) { return std::string(c.member); }                                    \
    }                                                                                                 \
  }
#define PATH_FIELD(key, member)                                                                       \
  {                                                                                                   \
    key, Field {                                                                                      \
      [](RunConfig &c, const std::string &, const std::string &v) { c.member = v; },                  \
          [](const RunConfig &c) { return c.member.string(); }                                        \
    }                                                                                                 \
  }
#define BOOL_FIELD(key, member)                                                                       \
  {                                                                                                   \
    key, Field {                                                                                      \
      [](RunConfig &c, const std::string &k, const std::string &v) { c.member = to_bool(k, v); },     \
          [](const RunConfig &c) { return std::string(c.member ? "true" : "false"); }                 \
    }                                                                                                 \
  }
#define DOUBLE_FIELD(key, member)                                                                     \
  {                                                                                                   \
    key, Field {                                                                                      \
      [](RunConfig &c, const std::string &k, const std::string &v) { c.member = to_double(k, v); },   \
          [](const RunConfig &c) { return fmt(c.member); }                                            \
    }                                                                                                 \
  }

const std::map<std::string, Field> &fields() {
  static const std::map<std::string, Field> table{
      PATH_FIELD("run_dir", run_dir),
      PATH_FIELD("offline_dir", offline_dir),
      PATH_FIELD("text_dir", text_dir),
      PATH_FIELD("asset_dir", asset_dir),
      STRING_FIELD("scholarly_base_url", scholarly_base_url),
      STRING_FIELD("scholarly_api_key_env", scholarly_api_key_env),
      SIZE_FIELD("capacity", capacity),
      SIZE_FIELD("chunk_tokens", chunk_tokens),
      SIZE_FIELD("query_count", query_count),
      SIZE_FIELD("max_points", max_points),
      SIZE_FIELD("n_recall", n_recall),
      DOUBLE_FIELD("fusion_weight", fusion_weight),
      SIZE_FIELD("k_final", k_final),
      BOOL_FIELD("rerank_fallback", rerank_fallback),
      SIZE_FIELD("context_cap", context_cap),
      SIZE_FIELD("max_parallel", max_parallel),
      SIZE_FIELD("target_budget_tokens", target_budget_tokens),
      SIZE_FIELD("source_budget_tokens", source_budget_tokens),
      SIZE_FIELD("report_budget_tokens", report_budget_tokens),
      BOOL_FIELD("fail_closed", fail_closed),
      BOOL_FIELD("polish", polish),
      STRING_FIELD("embedder", embedder),
      SIZE_FIELD("hashing_dim", hashing_dim),
      STRING_FIELD("reranker", reranker),
      STRING_FIELD("api_key_env", api_key_env),
      STRING_FIELD("gateway.chat_endpoint", gateway.chat_endpoint),
      STRING_FIELD("gateway.embed_endpoint", gateway.embed_endpoint),
      STRING_FIELD("gateway.rerank_endpoint", gateway.rerank_endpoint),
      STRING_FIELD("gateway.chat_model", gateway.chat_model),
      STRING_FIELD("gateway.embed_model", gateway.embed_model),
      STRING_FIELD("gateway.rerank_model", gateway.rerank_model),
      SIZE_FIELD("gateway.max_in_flight", gateway.max_in_flight),
      SIZE_FIELD("gateway.context_budget_tokens", gateway.context_budget_tokens),
      SIZE_FIELD("gateway.embed_batch_size", gateway.embed_batch_size),
      DOUBLE_FIELD("gateway.temperature", gateway.temperature),
      {"gateway.max_attempts",
       Field{[](RunConfig &c, const std::string &k, const std::string &v) {
               c.gateway.retry.max_attempts = static_cast<int>(to_size(k, v));
             },
             [](const RunConfig &c) { return std::to_string(c.gateway.retry.max_attempts); }}},
  };
  return table;
}

#undef SIZE_FIELD
#undef STRING_FIELD
#undef PATH_FIELD
#undef BOOL_FIELD
#undef DOUBLE_FIELD

} // namespace

void RunConfig::validate() const {
  const auto bad = [](const std::string &msg) { fail(ErrorKind::InvalidConfig, msg); };
  if (capacity == 0) {
    bad("capacity must be positive");
  }
  if (chunk_tokens == 0) {
    bad("chunk_tokens must be positive");
  }
  if (query_count == 0) {
    bad("query_count must be positive");
  }
  // The report format allows at most five points; fewer is not offered.
  if (max_points != 5) {
    bad("max_points is fixed at 5 by the report format");
  }
  if (n_recall == 0 || k_final == 0) {
    bad("n_recall and k_final must be positive");
  }
  if (k_final > n_recall) {
    bad("k_final must not exceed n_recall");
  }
  if (!(fusion_weight >= 0.0 && fusion_weight <= 1.0)) {
    bad("fusion_weight must lie in [0, 1]");
  }
  if (context_cap == 0 || max_parallel == 0) {
    bad("context_cap and max_parallel must be positive");
  }
  if (target_budget_tokens == 0 || source_budget_tokens == 0 || report_budget_tokens == 0) {
    bad("token budgets must be positive");
  }
  if (embedder != "hashing" && embedder != "http") {
    bad("embedder must be 'hashing' or 'http'");
  }
  if (reranker != "lexical" && reranker != "http" && reranker != "none") {
    bad("reranker must be 'lexical', 'http' or 'none'");
  }
  if (hashing_dim == 0) {
    bad("hashing_dim must be positive");
  }
  try {
    gateway.validate();
  } catch (const Error &e) {
    bad(e.what());
  }
}

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto &[k, _] : fields()) {
    out.push_back(k);
  }
  return out;
}

void apply(RunConfig &config, const std::string &key, const std::string &value) {
  const auto it = fields().find(key);
  if (it == fields().end()) {
    fail(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
  }
  it->second.set(config, key, value);
}

namespace {

RunConfig from_items(const std::vector<CLI::ConfigItem> &items) {
  RunConfig c;
  for (const auto &item : items) {
    // Section open/close markers emitted by the reader.
    if (item.name == "++" || item.name == "--") {
      continue;
    }
    std::vector<std::string> parents = item.parents;
    if (!parents.empty() && parents.front() == "default") {
      parents.erase(parents.begin());
    }
    std::string key;
    for (const auto &p : parents) {
      key += p + ".";
    }
    key += item.name;
    if (item.inputs.size() != 1) {
      fail(ErrorKind::InvalidConfig, key + ": expected a single value");
    }
    apply(c, key, item.inputs.front());
  }
  c.validate();
  return c;
}

} // namespace

RunConfig parse_config(const std::string &text) {
  std::istringstream in(text);
  try {
    return from_items(CLI::ConfigINI().from_config(in));
  } catch (const CLI::Error &e) {
    fail(ErrorKind::InvalidConfig, std::string("config parse error: ") + e.what());
  }
}

RunConfig load_config(const std::filesystem::path &path) {
  if (!std::filesystem::is_regular_file(path)) {
    fail(ErrorKind::InvalidConfig, "config file not found: " + path.string());
  }
  std::string content;
  try {
    content = text::read_file(path);
  } catch (const Error &e) {
    fail(ErrorKind::InvalidConfig, e.what());
  }
  return parse_config(content);
}

std::map<std::string, std::string> to_map(const RunConfig &config) {
  std::map<std::string, std::string> out;
  for (const auto &[k, f] : fields()) {
    out[k] = f.get(config);
  }
  return out;
}

} // namespace novelty::config
