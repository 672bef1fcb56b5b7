#include "enf/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace enf {

namespace {
std::atomic<bool> verbose{false};
std::atomic<bool> muted{false};
std::mutex out_mutex;
}  // namespace

void log_warning(const std::string& message) {
    if (muted) return;
    std::lock_guard lock(out_mutex);
    std::cerr << "warning: " << message << '\n';
}

void log_info(const std::string& message) {
    if (!verbose || muted) return;
    std::lock_guard lock(out_mutex);
    std::cerr << message << '\n';
}

void set_log_verbose(bool on) { verbose = on; }
void set_log_muted(bool on) { muted = on; }

}  // namespace enf
