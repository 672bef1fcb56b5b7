#pragma once

#include <cstddef>
#include <functional>

namespace enf {

/// Keep large tensor allocations on the heap instead of fresh mmap pages.
/// Tapes allocate and free many megabyte-sized buffers per sample; without
/// this most of the time goes to page faults. Call once from main().
void configure_allocator();

/// Run body(i) for i in [0, n) on up to `threads` workers. Results must be
/// written to per-index slots; reductions happen afterwards in index order,
/// so the outcome does not depend on the thread count.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace enf
