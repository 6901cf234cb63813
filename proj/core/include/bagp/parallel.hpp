#pragma once

#include <cstddef>
#include <functional>

namespace bagp {

/// Worker count used by the library: BAGP_THREADS if set, otherwise the
/// hardware concurrency (at least 1).
std::size_t default_thread_count();

/// Runs body(i) for i in [0, count) on up to `threads` workers. Exceptions
/// thrown by a task are rethrown (the first one) after all workers join.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace bagp
