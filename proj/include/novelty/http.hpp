#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <string>

namespace novelty::http {

using Headers = std::map<std::string, std::string>;

struct Response {
  int status = 0; // 0: transport failure, see `error`
  std::string body;
  std::string error;

  bool ok() const { return status >= 200 && status < 300; }
  // Worth retrying: transport failure, rate limiting, or server-side errors.
  bool transient() const { return status == 0 || status == 408 || status == 429 || status >= 500; }
};

class Client {
public:
  virtual ~Client() = default;
  virtual Response get(const std::string &url, const Headers &headers) = 0;
  virtual Response post(const std::string &url, const Headers &headers, const std::string &body) = 0;
};

// Blocking client over cpp-httplib. Accepts absolute http:// and https:// URLs.
std::shared_ptr<Client> make_client(std::chrono::seconds timeout = std::chrono::seconds(120));

std::string url_encode(const std::string &s);

} // namespace novelty::http
