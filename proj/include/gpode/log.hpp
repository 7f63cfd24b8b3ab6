#pragma once

#include <sstream>
#include <string>
#include <utility>

namespace gpode::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

void set_level(Level level);
[[nodiscard]] Level level();

void write(Level level, const std::string& message);

template <typename... Args>
void emit(Level lvl, Args&&... args) {
  if (lvl < level()) {
    return;
  }
  std::ostringstream os;
  (os << ... << std::forward<Args>(args));
  write(lvl, os.str());
}

template <typename... Args>
void info(Args&&... args) {
  emit(Level::info, std::forward<Args>(args)...);
}

template <typename... Args>
void warn(Args&&... args) {
  emit(Level::warn, std::forward<Args>(args)...);
}

}  // namespace gpode::log
