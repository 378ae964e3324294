#include "wmc/logging.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>

namespace wmc {

namespace {

LogLevel g_level = LogLevel::info;
bool g_initialized = false;
std::mutex g_mutex;

void init_from_env() {
    const char* env = std::getenv("WMC_LOG_LEVEL");
    if (env != nullptr) {
        if (std::strcmp(env, "error") == 0) {
            g_level = LogLevel::error;
        } else if (std::strcmp(env, "debug") == 0) {
            g_level = LogLevel::debug;
        } else {
            g_level = LogLevel::info;
        }
    }
    g_initialized = true;
}

void emit(const char* tag, const std::string& msg) {
    std::fprintf(stderr, "[%s] %s\n", tag, msg.c_str());
}

}  // namespace

LogLevel log_level() {
    std::lock_guard<std::mutex> lock(g_mutex);
    if (!g_initialized) {
        init_from_env();
    }
    return g_level;
}

void set_log_level(LogLevel level) {
    std::lock_guard<std::mutex> lock(g_mutex);
    g_level = level;
    g_initialized = true;
}

void log_error(const std::string& msg) {
    if (log_level() >= LogLevel::error) {
        emit("error", msg);
    }
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::info) {
        emit("info", msg);
    }
}

void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::debug) {
        emit("debug", msg);
    }
}

}  // namespace wmc
