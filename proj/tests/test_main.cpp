#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "enf/log.hpp"
#include "enf/runtime.hpp"

int main(int argc, char** argv) {
    enf::configure_allocator();
    enf::set_log_muted(true);
    doctest::Context context(argc, argv);
    return context.run();
}
