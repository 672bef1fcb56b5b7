#pragma once

#include <string>

namespace enf {

void log_warning(const std::string& message);
void log_info(const std::string& message);

/// Info messages are off by default; warnings always go to stderr unless muted.
void set_log_verbose(bool on);
void set_log_muted(bool on);

}  // namespace enf
