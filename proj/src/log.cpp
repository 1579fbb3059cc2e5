#include "hig/log.hpp"

#include <cstdio>

namespace hig::log {

namespace {
Level g_level = Level::Warn;
Sink g_sink;

const char* prefix(Level lv) {
  switch (lv) {
    case Level::Warn: return "warn";
    case Level::Info: return "info";
    case Level::Debug: return "debug";
    default: return "";
  }
}

void emit(Level lv, const std::string& msg) {
  if (static_cast<int>(lv) > static_cast<int>(g_level)) return;
  if (g_sink) {
    g_sink(lv, msg);
    return;
  }
  std::fprintf(stderr, "[%s] %s\n", prefix(lv), msg.c_str());
}
}  // namespace

Level level() { return g_level; }
void set_level(Level lv) { g_level = lv; }
void set_sink(Sink sink) { g_sink = std::move(sink); }

void warn(const std::string& msg) { emit(Level::Warn, msg); }
void info(const std::string& msg) { emit(Level::Info, msg); }
void debug(const std::string& msg) { emit(Level::Debug, msg); }

}  // namespace hig::log
