#ifndef LPDM_LOG_H
#define LPDM_LOG_H

#include <string>

namespace lpdm {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

/// Level comes from the LPDM_LOG env var (error|info|debug); default info.
LogLevel log_level();
void set_log_level(LogLevel level);

void log_error(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace lpdm

#endif
