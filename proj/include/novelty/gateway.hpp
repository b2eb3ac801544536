#pragma once

#include "novelty/http.hpp"
#include "novelty/ingest.hpp"
#include "novelty/providers.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <vector>

namespace novelty::gateway {

struct RetryPolicy {
  int max_attempts = 3;
  // Delay before retry k (1-based) is backoff[min(k, size) - 1].
  std::vector<std::chrono::milliseconds> backoff = {std::chrono::milliseconds(1000),
                                                    std::chrono::milliseconds(4000)};
};

struct GatewayConfig {
  std::string chat_endpoint = "https://api.openai.com/v1/chat/completions";
  std::string embed_endpoint = "https://api.openai.com/v1/embeddings";
  std::string rerank_endpoint;
  std::string chat_model = "gpt-5-mini";
  std::string embed_model = "text-embedding-3-small";
  std::string rerank_model;
  std::string api_key;
  std::size_t max_in_flight = 4;
  RetryPolicy retry;
  std::size_t context_budget_tokens = 120000;
  std::size_t embed_batch_size = 64;
  double temperature = 0.0;

  void validate() const;
};

// Thrown by backends for failures worth retrying (429, 5xx, timeouts).
class TransientFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ChatBackend {
public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const ChatRequest &request) = 0;
};

class EmbedBackend {
public:
  virtual ~EmbedBackend() = default;
  virtual std::vector<std::vector<float>> embed_batch(const std::vector<std::string> &texts) = 0;
};

class RerankBackend {
public:
  virtual ~RerankBackend() = default;
  virtual std::vector<double> score(std::string_view query,
                                    const std::vector<std::string> &passages) = 0;
};

// OpenAI-compatible wire formats:
//   chat:   POST {model, temperature, messages:[{role, content}]}
//           -> {choices:[{message:{content}}]}
//   embed:  POST {model, input:[...]} -> {data:[{index, embedding:[...]}]}
//   rerank: POST {model, query, documents:[...]}
//           -> {results:[{index, relevance_score}]}
class HttpChatBackend final : public ChatBackend {
public:
  HttpChatBackend(GatewayConfig config, std::shared_ptr<http::Client> client);
  std::string complete(const ChatRequest &request) override;

private:
  GatewayConfig config_;
  std::shared_ptr<http::Client> client_;
};

class HttpEmbedBackend final : public EmbedBackend {
public:
  HttpEmbedBackend(GatewayConfig config, std::shared_ptr<http::Client> client);
  std::vector<std::vector<float>> embed_batch(const std::vector<std::string> &texts) override;

private:
  GatewayConfig config_;
  std::shared_ptr<http::Client> client_;
};

class HttpRerankBackend final : public RerankBackend {
public:
  HttpRerankBackend(GatewayConfig config, std::shared_ptr<http::Client> client);
  std::vector<double> score(std::string_view query, const std::vector<std::string> &passages) override;

private:
  GatewayConfig config_;
  std::shared_ptr<http::Client> client_;
};

struct TranscriptEntry {
  std::string stage;
  std::string request_hash; // empty in hand-written scripts
  std::string system;
  std::string prompt;
  std::string response;
  std::string started_at;
  std::string finished_at;
};

std::string request_hash(const ChatRequest &request);

nlohmann::json to_json(const TranscriptEntry &entry);
TranscriptEntry transcript_entry_from_json(const nlohmann::json &j);

// Thread-safe append-only log; persisted as JSON lines
// {stage, request_hash, system, prompt, response, timestamps:{start, end}}.
class Transcript {
public:
  void record(TranscriptEntry entry);
  std::vector<TranscriptEntry> entries() const;
  void write_jsonl(const std::filesystem::path &path) const;
  static std::vector<TranscriptEntry> read_jsonl(const std::filesystem::path &path);

private:
  mutable std::mutex mutex_;
  std::vector<TranscriptEntry> entries_;
};

// Serves recorded responses. For each request it takes the first unused entry
// of the same stage whose request_hash matches, else the first unused entry of
// that stage. Stage-local order is therefore the script order.
class ReplayChatBackend final : public ChatBackend {
public:
  explicit ReplayChatBackend(std::vector<TranscriptEntry> script);
  static std::shared_ptr<ReplayChatBackend> from_file(const std::filesystem::path &path);

  std::string complete(const ChatRequest &request) override;
  std::size_t remaining() const;

private:
  mutable std::mutex mutex_;
  std::vector<TranscriptEntry> script_;
  std::vector<bool> used_;
};

struct GatewayStats {
  std::size_t requests = 0;
  std::size_t retries = 0;
  std::size_t max_in_flight_observed = 0;
};

// Single choke point for model traffic: bounded in-flight requests, retries
// with backoff, head-preserving budget truncation and transcript capture.
class Gateway final : public ChatProvider, public EmbeddingProvider, public RerankProvider {
public:
  Gateway(GatewayConfig config, std::shared_ptr<ChatBackend> chat,
          std::shared_ptr<EmbedBackend> embed = nullptr,
          std::shared_ptr<RerankBackend> rerank = nullptr,
          std::shared_ptr<const ingest::Tokenizer> tokenizer = nullptr);

  std::string chat(const ChatRequest &request) override;
  std::vector<std::vector<float>> embed(const std::vector<std::string> &texts) override;
  std::vector<double> score(std::string_view query,
                            const std::vector<std::string> &passages) override;

  // The request as it would be sent: the user message is cut (keeping its
  // head) so system + user fit the context budget.
  ChatRequest fit_to_budget(const ChatRequest &request) const;

  const Transcript &transcript() const { return transcript_; }
  GatewayStats stats() const;
  const GatewayConfig &config() const { return config_; }

private:
  template <typename Fn> auto with_retries(const std::string &what, Fn &&fn);

  GatewayConfig config_;
  std::shared_ptr<ChatBackend> chat_;
  std::shared_ptr<EmbedBackend> embed_;
  std::shared_ptr<RerankBackend> rerank_;
  std::shared_ptr<const ingest::Tokenizer> tokenizer_;
  std::counting_semaphore<1024> slots_;
  Transcript transcript_;

  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_observed_{0};
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> retries_{0};
};

void normalize(std::vector<float> &v);

} // namespace novelty::gateway
