#pragma once

#include <cstdio>
#include <ctime>
#include <string>

namespace mtr {

// Logs go to stderr so data written to stdout stays pipeline-clean.
// Timestamps appear only here, never in data files.

enum class LogLevel { Info, Warn, Error };

inline void log_line(LogLevel level, const std::string& msg) {
    const char* tag = level == LogLevel::Info ? "INFO" : level == LogLevel::Warn ? "WARN" : "ERROR";
    char stamp[32];
    std::time_t now = std::time(nullptr);
    std::tm tm_buf{};
#if defined(_WIN32)
    gmtime_s(&tm_buf, &now);
#else
    gmtime_r(&now, &tm_buf);
#endif
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_buf);
    std::fprintf(stderr, "[%s] %s %s\n", stamp, tag, msg.c_str());
}

inline void log_info(const std::string& msg) { log_line(LogLevel::Info, msg); }
inline void log_warn(const std::string& msg) { log_line(LogLevel::Warn, msg); }
inline void log_error(const std::string& msg) { log_line(LogLevel::Error, msg); }

} // namespace mtr
