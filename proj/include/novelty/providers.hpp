#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace novelty {

struct ChatRequest {
  std::string stage; // transcript key, e.g. "analysis.p2"
  std::string system;
  std::string user;
};

class ChatProvider {
public:
  virtual ~ChatProvider() = default;
  virtual std::string chat(const ChatRequest &request) = 0;
};

class EmbeddingProvider {
public:
  virtual ~EmbeddingProvider() = default;
  // One vector per input text, same order.
  virtual std::vector<std::vector<float>> embed(const std::vector<std::string> &texts) = 0;
};

class RerankProvider {
public:
  virtual ~RerankProvider() = default;
  // One relevance score per passage, same order.
  virtual std::vector<double> score(std::string_view query,
                                    const std::vector<std::string> &passages) = 0;
};

} // namespace novelty
