#include "gpode/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace gpode::log {
namespace {

std::atomic<Level> g_level{Level::warn};
std::mutex g_mutex;

const char* tag(Level lvl) {
  switch (lvl) {
    case Level::debug:
      return "debug";
    case Level::info:
      return "info";
    case Level::warn:
      return "warn";
    case Level::error:
      return "error";
    case Level::off:
      break;
  }
  return "";
}

}  // namespace

void set_level(Level lvl) { g_level.store(lvl); }

Level level() { return g_level.load(); }

void write(Level lvl, const std::string& message) {
  std::lock_guard<std::mutex> lock(g_mutex);
  std::clog << "[gpode " << tag(lvl) << "] " << message << '\n';
}

}  // namespace gpode::log
