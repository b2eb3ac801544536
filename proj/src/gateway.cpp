#include "novelty/gateway.hpp"

#include "novelty/error.hpp"
#include "novelty/text.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <thread>

namespace novelty::gateway {

using nlohmann::json;

void GatewayConfig::validate() const {
  if (max_in_flight < 1 || max_in_flight > 1024) {
    fail(ErrorKind::InvalidConfig, "max_in_flight must be in [1, 1024]");
  }
  if (retry.max_attempts < 1) {
    fail(ErrorKind::InvalidConfig, "max_attempts must be >= 1");
  }
  if (context_budget_tokens < 1) {
    fail(ErrorKind::InvalidConfig, "context_budget_tokens must be positive");
  }
  if (embed_batch_size < 1) {
    fail(ErrorKind::InvalidConfig, "embed_batch_size must be positive");
  }
}

namespace {

http::Headers auth_headers(const GatewayConfig &config) {
  http::Headers h{{"Content-Type", "application/json"}};
  if (!config.api_key.empty()) {
    h["Authorization"] = "Bearer " + config.api_key;
  }
  return h;
}

json post_json(http::Client &client, const GatewayConfig &config, const std::string &url,
               const json &body) {
  if (url.empty()) {
    fail(ErrorKind::ProviderUnavailable, "endpoint not configured");
  }
  const http::Response resp = client.post(url, auth_headers(config), body.dump());
  if (resp.transient()) {
    throw TransientFailure(url + " -> " +
                           (resp.status == 0 ? resp.error : std::to_string(resp.status)));
  }
  if (!resp.ok()) {
    fail(ErrorKind::ProviderUnavailable,
         url + " -> " + std::to_string(resp.status) + ": " + resp.body.substr(0, 300));
  }
  try {
    return json::parse(resp.body);
  } catch (const json::exception &e) {
    fail(ErrorKind::ProviderUnavailable, url + " returned invalid JSON: " + e.what());
  }
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

} // namespace

HttpChatBackend::HttpChatBackend(GatewayConfig config, std::shared_ptr<http::Client> client)
    : config_(std::move(config)), client_(std::move(client)) {}

std::string HttpChatBackend::complete(const ChatRequest &request) {
  json body;
  body["model"] = config_.chat_model;
  body["temperature"] = config_.temperature;
  body["messages"] = json::array();
  if (!request.system.empty()) {
    body["messages"].push_back({{"role", "system"}, {"content", request.system}});
  }
  body["messages"].push_back({{"role", "user"}, {"content", request.user}});
  const json resp = post_json(*client_, config_, config_.chat_endpoint, body);
  try {
    return resp.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception &e) {
    fail(ErrorKind::ProviderUnavailable, std::string("chat response missing content: ") + e.what());
  }
}

HttpEmbedBackend::HttpEmbedBackend(GatewayConfig config, std::shared_ptr<http::Client> client)
    : config_(std::move(config)), client_(std::move(client)) {}

std::vector<std::vector<float>> HttpEmbedBackend::embed_batch(const std::vector<std::string> &texts) {
  json body;
  body["model"] = config_.embed_model;
  body["input"] = texts;
  const json resp = post_json(*client_, config_, config_.embed_endpoint, body);
  std::vector<std::vector<float>> out(texts.size());
  try {
    const auto &data = resp.at("data");
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::size_t index = data[i].contains("index") ? data[i]["index"].get<std::size_t>() : i;
      if (index >= out.size()) {
        fail(ErrorKind::ProviderUnavailable, "embedding index out of range");
      }
      out[index] = data[i].at("embedding").get<std::vector<float>>();
    }
  } catch (const json::exception &e) {
    fail(ErrorKind::ProviderUnavailable, std::string("malformed embedding response: ") + e.what());
  }
  for (const auto &v : out) {
    if (v.empty()) {
      fail(ErrorKind::ProviderUnavailable, "embedding response is missing vectors");
    }
  }
  return out;
}

HttpRerankBackend::HttpRerankBackend(GatewayConfig config, std::shared_ptr<http::Client> client)
    : config_(std::move(config)), client_(std::move(client)) {}

std::vector<double> HttpRerankBackend::score(std::string_view query,
                                             const std::vector<std::string> &passages) {
  json body;
  body["model"] = config_.rerank_model;
  body["query"] = std::string(query);
  body["documents"] = passages;
  const json resp = post_json(*client_, config_, config_.rerank_endpoint, body);
  std::vector<double> scores(passages.size(), std::nan(""));
  try {
    for (const auto &r : resp.at("results")) {
      const auto index = r.at("index").get<std::size_t>();
      if (index < scores.size()) {
        scores[index] = r.at("relevance_score").get<double>();
      }
    }
  } catch (const json::exception &e) {
    fail(ErrorKind::ProviderUnavailable, std::string("malformed rerank response: ") + e.what());
  }
  for (double s : scores) {
    if (std::isnan(s)) {
      fail(ErrorKind::ProviderUnavailable, "rerank response does not score every passage");
    }
  }
  return scores;
}

// --- transcripts --------------------------------------------------------------

std::string request_hash(const ChatRequest &request) {
  std::string key = request.stage;
  key.push_back('\0');
  key += request.system;
  key.push_back('\0');
  key += request.user;
  return text::hex64(text::fnv1a64(key));
}

json to_json(const TranscriptEntry &e) {
  json j;
  j["stage"] = e.stage;
  j["request_hash"] = e.request_hash;
  j["system"] = e.system;
  j["prompt"] = e.prompt;
  j["response"] = e.response;
  j["timestamps"] = {{"start", e.started_at}, {"end", e.finished_at}};
  return j;
}

TranscriptEntry transcript_entry_from_json(const json &j) {
  TranscriptEntry e;
  e.stage = j.at("stage").get<std::string>();
  e.response = j.at("response").get<std::string>();
  e.request_hash = j.value("request_hash", "");
  e.system = j.value("system", "");
  e.prompt = j.value("prompt", "");
  if (j.contains("timestamps") && j["timestamps"].is_object()) {
    e.started_at = j["timestamps"].value("start", "");
    e.finished_at = j["timestamps"].value("end", "");
  }
  return e;
}

void Transcript::record(TranscriptEntry entry) {
  std::lock_guard lock(mutex_);
  entries_.push_back(std::move(entry));
}

std::vector<TranscriptEntry> Transcript::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

void Transcript::write_jsonl(const std::filesystem::path &path) const {
  std::string out;
  for (const auto &e : entries()) {
    out += to_json(e).dump();
    out += '\n';
  }
  text::write_file(path, out);
}

std::vector<TranscriptEntry> Transcript::read_jsonl(const std::filesystem::path &path) {
  std::vector<TranscriptEntry> out;
  std::size_t line_no = 0;
  for (const auto &line : text::split_lines(text::read_file(path))) {
    ++line_no;
    if (text::trim(line).empty()) {
      continue;
    }
    try {
      out.push_back(transcript_entry_from_json(json::parse(line)));
    } catch (const json::exception &e) {
      fail(ErrorKind::InvalidInput,
           path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

ReplayChatBackend::ReplayChatBackend(std::vector<TranscriptEntry> script)
    : script_(std::move(script)), used_(script_.size(), false) {}

std::shared_ptr<ReplayChatBackend> ReplayChatBackend::from_file(const std::filesystem::path &path) {
  return std::make_shared<ReplayChatBackend>(Transcript::read_jsonl(path));
}

std::string ReplayChatBackend::complete(const ChatRequest &request) {
  const std::string hash = request_hash(request);
  std::lock_guard lock(mutex_);
  std::size_t pick = script_.size();
  for (std::size_t i = 0; i < script_.size(); ++i) {
    if (!used_[i] && script_[i].stage == request.stage && script_[i].request_hash == hash) {
      pick = i;
      break;
    }
  }
  if (pick == script_.size()) {
    for (std::size_t i = 0; i < script_.size(); ++i) {
      if (!used_[i] && script_[i].stage == request.stage) {
        pick = i;
        break;
      }
    }
  }
  if (pick == script_.size()) {
    fail(ErrorKind::ProviderUnavailable, "no scripted response left for stage " + request.stage);
  }
  used_[pick] = true;
  return script_[pick].response;
}

std::size_t ReplayChatBackend::remaining() const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(std::count(used_.begin(), used_.end(), false));
}

// --- gateway ----------------------------------------------------------------------

void normalize(std::vector<float> &v) {
  double sq = 0.0;
  for (float x : v) {
    sq += static_cast<double>(x) * x;
  }
  if (sq <= 0.0) {
    return;
  }
  const double inv = 1.0 / std::sqrt(sq);
  for (float &x : v) {
    x = static_cast<float>(x * inv);
  }
}

Gateway::Gateway(GatewayConfig config, std::shared_ptr<ChatBackend> chat,
                 std::shared_ptr<EmbedBackend> embed, std::shared_ptr<RerankBackend> rerank,
                 std::shared_ptr<const ingest::Tokenizer> tokenizer)
    : config_(std::move(config)), chat_(std::move(chat)), embed_(std::move(embed)),
      rerank_(std::move(rerank)),
      tokenizer_(tokenizer ? std::move(tokenizer)
                           : std::make_shared<const ingest::WordPunctTokenizer>()),
      slots_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(config_.max_in_flight, 1, 1024))) {
  config_.validate();
}

template <typename Fn> auto Gateway::with_retries(const std::string &what, Fn &&fn) {
  const int attempts = config_.retry.max_attempts;
  std::string last_error;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (attempt > 1) {
      ++retries_;
      const auto &schedule = config_.retry.backoff;
      if (!schedule.empty()) {
        std::this_thread::sleep_for(
            schedule[std::min<std::size_t>(static_cast<std::size_t>(attempt - 1), schedule.size()) - 1]);
      }
    }
    slots_.acquire();
    const std::size_t now = ++in_flight_;
    std::size_t seen = max_in_flight_observed_.load();
    while (now > seen && !max_in_flight_observed_.compare_exchange_weak(seen, now)) {
    }
    ++requests_;
    struct Release {
      Gateway *g;
      ~Release() {
        --g->in_flight_;
        g->slots_.release();
      }
    } release{this};
    try {
      return fn();
    } catch (const TransientFailure &e) {
      last_error = e.what();
    }
  }
  fail(ErrorKind::ProviderUnavailable,
       what + " failed after " + std::to_string(attempts) + " attempts: " + last_error);
}

ChatRequest Gateway::fit_to_budget(const ChatRequest &request) const {
  const std::size_t system_tokens = tokenizer_->count(request.system);
  if (system_tokens >= config_.context_budget_tokens) {
    fail(ErrorKind::BudgetExceeded, "system prompt for stage " + request.stage + " uses " +
                                        std::to_string(system_tokens) + " of " +
                                        std::to_string(config_.context_budget_tokens) + " tokens");
  }
  ChatRequest fitted = request;
  const std::size_t room = config_.context_budget_tokens - system_tokens;
  fitted.user = std::string(tokenizer_->head(request.user, room));
  return fitted;
}

std::string Gateway::chat(const ChatRequest &request) {
  if (!chat_) {
    fail(ErrorKind::ProviderUnavailable, "no chat backend configured");
  }
  const ChatRequest sent = fit_to_budget(request);
  TranscriptEntry entry;
  entry.stage = sent.stage;
  entry.request_hash = request_hash(sent);
  entry.system = sent.system;
  entry.prompt = sent.user;
  entry.started_at = utc_now();
  entry.response = with_retries("chat[" + sent.stage + "]", [&] { return chat_->complete(sent); });
  entry.finished_at = utc_now();
  transcript_.record(entry);
  return entry.response;
}

std::vector<std::vector<float>> Gateway::embed(const std::vector<std::string> &texts) {
  std::vector<std::vector<float>> out;
  if (texts.empty()) {
    return out;
  }
  if (!embed_) {
    fail(ErrorKind::ProviderUnavailable, "no embedding backend configured");
  }
  out.reserve(texts.size());
  const std::size_t batch = config_.embed_batch_size;
  for (std::size_t start = 0; start < texts.size(); start += batch) {
    const std::vector<std::string> slice(
        texts.begin() + static_cast<std::ptrdiff_t>(start),
        texts.begin() + static_cast<std::ptrdiff_t>(std::min(start + batch, texts.size())));
    auto vectors = with_retries("embed", [&] { return embed_->embed_batch(slice); });
    if (vectors.size() != slice.size()) {
      fail(ErrorKind::DimensionMismatch, "embedding backend returned " +
                                             std::to_string(vectors.size()) + " vectors for " +
                                             std::to_string(slice.size()) + " texts");
    }
    for (auto &v : vectors) {
      if (!out.empty() && v.size() != out.front().size()) {
        fail(ErrorKind::DimensionMismatch, "embedding dimension changed from " +
                                               std::to_string(out.front().size()) + " to " +
                                               std::to_string(v.size()));
      }
      normalize(v);
      out.push_back(std::move(v));
    }
  }
  return out;
}

std::vector<double> Gateway::score(std::string_view query, const std::vector<std::string> &passages) {
  if (passages.empty()) {
    return {};
  }
  if (!rerank_) {
    fail(ErrorKind::ProviderUnavailable, "no rerank backend configured");
  }
  auto scores = with_retries("rerank", [&] { return rerank_->score(query, passages); });
  if (scores.size() != passages.size()) {
    fail(ErrorKind::ProviderUnavailable, "rerank backend returned a misaligned score list");
  }
  return scores;
}

GatewayStats Gateway::stats() const {
  return {requests_.load(), retries_.load(), max_in_flight_observed_.load()};
}

} // namespace novelty::gateway
