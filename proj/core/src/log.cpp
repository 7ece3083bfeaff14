#include "lscnn/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace lscnn::log {

Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("LSCNN_LOG");
    if (!env) return Level::kInfo;
    if (std::strcmp(env, "debug") == 0) return Level::kDebug;
    if (std::strcmp(env, "info") == 0) return Level::kInfo;
    if (std::strcmp(env, "warn") == 0) return Level::kWarn;
    if (std::strcmp(env, "error") == 0) return Level::kError;
    return Level::kInfo;
  }();
  return level;
}

bool enabled(Level level) {
  return static_cast<int>(level) >= static_cast<int>(threshold());
}

void emit(Level level, const std::string& msg) {
  static const char* names[] = {"debug", "info", "warn", "error"};
  std::fprintf(stderr, "[%s] %s\n", names[static_cast<int>(level)],
               msg.c_str());
}

}  // namespace lscnn::log
