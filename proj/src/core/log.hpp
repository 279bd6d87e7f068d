#pragma once

#include <functional>
#include <string>

namespace stereotrap {

enum class LogLevel { kDebug = 0, kInfo = 1, kWarning = 2, kError = 3, kOff = 4 };

using LogSink = std::function<void(LogLevel, const std::string&)>;

// Messages below the threshold are dropped. The default sink prints to stderr.
void SetLogLevel(LogLevel level);
LogLevel GetLogLevel();
// An empty sink restores the default.
void SetLogSink(LogSink sink);

void Log(LogLevel level, const std::string& message);

}  // namespace stereotrap
