#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace lvm {

enum class LogLevel { silent = 0, info = 1, debug = 2 };

/// Verbosity from the LVM_LOG environment variable (info | debug); anything
/// else, or unset, is silent. Read once per process.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("LVM_LOG");
    if (env == nullptr) return LogLevel::silent;
    const std::string v(env);
    if (v == "debug") return LogLevel::debug;
    if (v == "info") return LogLevel::info;
    return LogLevel::silent;
  }();
  return level;
}

inline void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::info) std::cerr << "[lvm] " << msg << '\n';
}

inline void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::debug) std::cerr << "[lvm:debug] " << msg << '\n';
}

}  // namespace lvm
