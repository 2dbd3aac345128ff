#include "smallgeo/log.hpp"

#include <iostream>
#include <mutex>

namespace smallgeo::log {

namespace {

std::mutex g_mutex;
Level g_level = Level::warn;
Sink g_sink;

const char* level_name(Level level) {
    switch (level) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warning";
    case Level::error: return "error";
    case Level::off: break;
    }
    return "";
}

} // namespace

void set_level(Level level) {
    std::lock_guard lock(g_mutex);
    g_level = level;
}

Level level() {
    std::lock_guard lock(g_mutex);
    return g_level;
}

Sink set_sink(Sink sink) {
    std::lock_guard lock(g_mutex);
    std::swap(g_sink, sink);
    return sink;
}

void write(Level lvl, std::string_view message) {
    std::lock_guard lock(g_mutex);
    if (lvl < g_level || lvl == Level::off) return;
    if (g_sink) {
        g_sink(lvl, message);
        return;
    }
    std::clog << "smallgeo " << level_name(lvl) << ": " << message << '\n';
}

} // namespace smallgeo::log
