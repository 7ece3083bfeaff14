#pragma once

#include <sstream>
#include <string>

namespace lscnn::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3 };

// Threshold comes from the LSCNN_LOG environment variable
// (debug|info|warn|error); default info.
Level threshold();
bool enabled(Level level);
void emit(Level level, const std::string& msg);

template <typename... Args>
void write(Level level, Args&&... args) {
  if (!enabled(level)) return;
  std::ostringstream os;
  (os << ... << args);
  emit(level, os.str());
}

template <typename... Args>
void debug(Args&&... args) {
  write(Level::kDebug, std::forward<Args>(args)...);
}
template <typename... Args>
void info(Args&&... args) {
  write(Level::kInfo, std::forward<Args>(args)...);
}
template <typename... Args>
void warn(Args&&... args) {
  write(Level::kWarn, std::forward<Args>(args)...);
}
template <typename... Args>
void error(Args&&... args) {
  write(Level::kError, std::forward<Args>(args)...);
}

}  // namespace lscnn::log
