#include "bagp/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace bagp::log {
namespace {

std::atomic<Level> g_level{Level::warn};
std::mutex g_mutex;

void emit(Level lvl, std::string_view tag, std::string_view message) {
  if (lvl < g_level.load(std::memory_order_relaxed)) return;
  std::lock_guard lock(g_mutex);
  std::clog << "[bagp " << tag << "] " << message << '\n';
}

}  // namespace

void set_level(Level lvl) { g_level.store(lvl, std::memory_order_relaxed); }
Level level() { return g_level.load(std::memory_order_relaxed); }

void debug(std::string_view message) { emit(Level::debug, "debug", message); }
void info(std::string_view message) { emit(Level::info, "info", message); }
void warn(std::string_view message) { emit(Level::warn, "warn", message); }

}  // namespace bagp::log
