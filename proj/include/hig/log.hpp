#pragma once

#include <functional>
#include <string>

namespace hig::log {

enum class Level { Silent = 0, Warn = 1, Info = 2, Debug = 3 };

Level level();
void set_level(Level lv);

// Sink override, used by tests to capture warnings. Empty sink restores stderr.
using Sink = std::function<void(Level, const std::string&)>;
void set_sink(Sink sink);

void warn(const std::string& msg);
void info(const std::string& msg);
void debug(const std::string& msg);

}  // namespace hig::log
