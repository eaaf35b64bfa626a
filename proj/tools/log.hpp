#pragma once

// Minimal leveled logger on stderr. Level from MPROF_LOG_LEVEL:
// debug | info (default) | warn | error | off.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <string_view>

namespace mprof::cli {

enum class Level { Debug = 0, Info, Warn, Error, Off };

inline Level log_level() {
    static const Level level = [] {
        const char* env = std::getenv("MPROF_LOG_LEVEL");
        const std::string_view v = env ? env : "info";
        if (v == "debug") return Level::Debug;
        if (v == "warn") return Level::Warn;
        if (v == "error") return Level::Error;
        if (v == "off") return Level::Off;
        return Level::Info;
    }();
    return level;
}

inline void log(Level level, std::string_view msg) {
    static constexpr const char* kNames[] = {"debug", "info", "warn", "error"};
    if (level < log_level() || level == Level::Off) return;
    std::fprintf(stderr, "[%s] %.*s\n", kNames[static_cast<int>(level)], static_cast<int>(msg.size()), msg.data());
}

inline void info(std::string_view msg) { log(Level::Info, msg); }
inline void warn(std::string_view msg) { log(Level::Warn, msg); }
inline void debug(std::string_view msg) { log(Level::Debug, msg); }

}  // namespace mprof::cli
