#pragma once

#include <cstdlib>
#include <iostream>
#include <string_view>

namespace vqasoft::log {

enum class Level { Quiet = 0, Info = 1, Debug = 2 };

/// Reads VQASOFT_LOG ("quiet", "info", "debug"); defaults to info.
inline Level level() {
    static const Level cached = [] {
        const char* env = std::getenv("VQASOFT_LOG");
        if (env == nullptr) return Level::Info;
        std::string_view v(env);
        if (v == "quiet" || v == "0") return Level::Quiet;
        if (v == "debug" || v == "2") return Level::Debug;
        return Level::Info;
    }();
    return cached;
}

template <typename... Args>
void info(const Args&... args) {
    if (level() >= Level::Info) {
        ((std::cerr << args), ...);
        std::cerr << '\n';
    }
}

template <typename... Args>
void debug(const Args&... args) {
    if (level() >= Level::Debug) {
        ((std::cerr << args), ...);
        std::cerr << '\n';
    }
}

} // namespace vqasoft::log
