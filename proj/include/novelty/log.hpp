#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace novelty::log {

enum class Level { debug, info, warn, error };

using Sink = std::function<void(Level, std::string_view)>;

// Default sink writes "[level] message" to stderr for info and above.
void set_sink(Sink sink);
void reset_sink();
void set_min_level(Level level);

void write(Level level, std::string_view message);
inline void debug(std::string_view m) { write(Level::debug, m); }
inline void info(std::string_view m) { write(Level::info, m); }
inline void warn(std::string_view m) { write(Level::warn, m); }
inline void error(std::string_view m) { write(Level::error, m); }

} // namespace novelty::log
