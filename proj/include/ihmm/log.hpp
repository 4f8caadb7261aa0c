#pragma once

#include <functional>
#include <string_view>

namespace ihmm {

/// Receives warnings such as initialization fallbacks. Defaults to stderr.
using LogSink = std::function<void(std::string_view)>;

void set_log_sink(LogSink sink);
void log_warning(std::string_view message);

}  // namespace ihmm
