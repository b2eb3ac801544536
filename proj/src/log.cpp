#include "novelty/log.hpp"

#include <iostream>
#include <mutex>

namespace novelty::log {
namespace {

std::mutex g_mutex;
Level g_min = Level::info;
Sink g_sink;

std::string_view label(Level l) {
  switch (l) {
  case Level::debug: return "debug";
  case Level::info: return "info";
  case Level::warn: return "warn";
  case Level::error: return "error";
  }
  return "?";
}

} // namespace

void set_sink(Sink sink) {
  std::lock_guard lock(g_mutex);
  g_sink = std::move(sink);
}

void reset_sink() { set_sink(nullptr); }

void set_min_level(Level level) {
  std::lock_guard lock(g_mutex);
  g_min = level;
}

void write(Level level, std::string_view message) {
  std::lock_guard lock(g_mutex);
  if (g_sink) {
    g_sink(level, message);
    return;
  }
  if (level >= g_min) {
    std::cerr << '[' << label(level) << "] " << message << '\n';
  }
}

} // namespace novelty::log
