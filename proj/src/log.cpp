#include "lpdm/log.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace lpdm {

namespace {

LogLevel parse_env() {
    const char* e = std::getenv("LPDM_LOG");
    if (!e) return LogLevel::Info;
    if (std::strcmp(e, "error") == 0) return LogLevel::Error;
    if (std::strcmp(e, "debug") == 0) return LogLevel::Debug;
    return LogLevel::Info;
}

LogLevel& level_ref() {
    static LogLevel level = parse_env();
    return level;
}

}  // namespace

LogLevel log_level() { return level_ref(); }
void set_log_level(LogLevel level) { level_ref() = level; }

void log_error(const std::string& msg) {
    std::fprintf(stderr, "[lpdm:error] %s\n", msg.c_str());
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::Info)
        std::fprintf(stderr, "[lpdm] %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::Debug)
        std::fprintf(stderr, "[lpdm:debug] %s\n", msg.c_str());
}

}  // namespace lpdm
