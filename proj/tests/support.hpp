#pragma once

#include "novelty/error.hpp"
#include "novelty/log.hpp"
#include "novelty/providers.hpp"

#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace test_support {

inline std::filesystem::path fixture_dir() { return NOVELTY_FIXTURE_DIR; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("novelty_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;
  const std::filesystem::path &path() const { return path_; }

private:
  std::filesystem::path path_;
};

// Per-stage queues of canned responses. Requests are recorded; running out
// of responses for a stage is ProviderUnavailable.
class ScriptedChat final : public novelty::ChatProvider {
public:
  ScriptedChat &on(const std::string &stage, std::string response) {
    std::lock_guard lock(mutex_);
    script_[stage].push_back(std::move(response));
    return *this;
  }

  std::string chat(const novelty::ChatRequest &request) override {
    std::lock_guard lock(mutex_);
    requests_.push_back(request);
    auto &queue = script_[request.stage];
    if (queue.empty()) {
      novelty::fail(novelty::ErrorKind::ProviderUnavailable, "no scripted response for " + request.stage);
    }
    std::string out = queue.front();
    queue.erase(queue.begin());
    return out;
  }

  std::vector<novelty::ChatRequest> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }
  std::size_t count(const std::string &stage) const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto &r : requests_) {
      n += r.stage == stage ? 1 : 0;
    }
    return n;
  }

private:
  mutable std::mutex mutex_;
  std::map<std::string, std::vector<std::string>> script_;
  std::vector<novelty::ChatRequest> requests_;
};

// Captures log lines for the lifetime of the object.
class LogCapture {
public:
  LogCapture() {
    novelty::log::set_sink([this](novelty::log::Level, std::string_view msg) {
      std::lock_guard lock(mutex_);
      lines_.emplace_back(msg);
    });
  }
  ~LogCapture() { novelty::log::reset_sink(); }
  std::vector<std::string> lines() const {
    std::lock_guard lock(mutex_);
    return lines_;
  }
  bool contains(const std::string &needle) const {
    for (const auto &l : lines()) {
      if (l.find(needle) != std::string::npos) {
        return true;
      }
    }
    return false;
  }

private:
  mutable std::mutex mutex_;
  std::vector<std::string> lines_;
};

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

template <typename Fn> novelty::ErrorKind error_kind_of(Fn &&fn) {
  try {
    fn();
  } catch (const novelty::Error &e) {
    return e.kind();
  }
  FAIL("expected a novelty::Error");
  return novelty::ErrorKind::Io;
}

} // namespace test_support
