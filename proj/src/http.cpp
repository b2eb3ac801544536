#include "novelty/http.hpp"

#include "novelty/error.hpp"

#include <httplib.h>

#include <cctype>

namespace novelty::http {

namespace {

struct SplitUrl {
  std::string origin; // scheme://host[:port]
  std::string path;   // starts with '/'
};

SplitUrl split_url(const std::string &url) {
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    fail(ErrorKind::InvalidConfig, "not an absolute URL: " + url);
  }
  const std::size_t path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {url, "/"};
  }
  return {url.substr(0, path_start), url.substr(path_start)};
}

httplib::Headers to_httplib(const Headers &headers) {
  httplib::Headers out;
  for (const auto &[k, v] : headers) {
    out.emplace(k, v);
  }
  return out;
}

Response from_result(const httplib::Result &result) {
  Response r;
  if (!result) {
    r.error = httplib::to_string(result.error());
    return r;
  }
  r.status = result->status;
  r.body = result->body;
  return r;
}

class HttplibClient final : public Client {
public:
  explicit HttplibClient(std::chrono::seconds timeout) : timeout_(timeout) {}

  Response get(const std::string &url, const Headers &headers) override {
    const auto parts = split_url(url);
    httplib::Client cli(parts.origin);
    configure(cli);
    return from_result(cli.Get(parts.path, to_httplib(headers)));
  }

  Response post(const std::string &url, const Headers &headers, const std::string &body) override {
    const auto parts = split_url(url);
    httplib::Client cli(parts.origin);
    configure(cli);
    return from_result(cli.Post(parts.path, to_httplib(headers), body, "application/json"));
  }

private:
  void configure(httplib::Client &cli) const {
    cli.set_connection_timeout(timeout_);
    cli.set_read_timeout(timeout_);
    cli.set_write_timeout(timeout_);
    cli.set_follow_location(true);
  }

  std::chrono::seconds timeout_;
};

} // namespace

std::shared_ptr<Client> make_client(std::chrono::seconds timeout) {
  return std::make_shared<HttplibClient>(timeout);
}

std::string url_encode(const std::string &s) {
  static constexpr char hex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) != 0 || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 0xF]);
    }
  }
  return out;
}

} // namespace novelty::http
