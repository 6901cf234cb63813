#pragma once

#include <string_view>

namespace bagp::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

void set_level(Level level);
Level level();

void debug(std::string_view message);
void info(std::string_view message);
void warn(std::string_view message);

}  // namespace bagp::log
