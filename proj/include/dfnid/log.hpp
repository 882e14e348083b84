#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <string>

namespace dfnid::log {

enum class Level : int { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Verbosity comes from DFN_IDENT_LOG (error|warn|info|debug); default warn.
inline Level threshold() {
  static const Level lvl = [] {
    const char* env = std::getenv("DFN_IDENT_LOG");
    if (!env) return Level::Warn;
    if (!std::strcmp(env, "error")) return Level::Error;
    if (!std::strcmp(env, "info")) return Level::Info;
    if (!std::strcmp(env, "debug")) return Level::Debug;
    return Level::Warn;
  }();
  return lvl;
}

inline void emit(Level lvl, const std::string& msg) {
  if (static_cast<int>(lvl) > static_cast<int>(threshold())) return;
  static std::mutex mu;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::lock_guard<std::mutex> lock(mu);
  std::fprintf(stderr, "[dfnid %s] %s\n", names[static_cast<int>(lvl)],
               msg.c_str());
}

inline void error(const std::string& m) { emit(Level::Error, m); }
inline void warn(const std::string& m) { emit(Level::Warn, m); }
inline void info(const std::string& m) { emit(Level::Info, m); }
inline void debug(const std::string& m) { emit(Level::Debug, m); }

}  // namespace dfnid::log
