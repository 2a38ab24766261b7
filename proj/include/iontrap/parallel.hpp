#pragma once

#include <cstddef>
#include <functional>

namespace iontrap {

/// Number of workers used when a caller passes 0.
unsigned default_workers() noexcept;

/// Runs body(i) for i in [0, n) on up to `workers` threads (0 = default).
///
/// Indices are handed out in contiguous blocks. The body must only write to
/// storage owned by index i; the first exception thrown by any body is
/// rethrown on the calling thread after all workers join.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& body);

}  // namespace iontrap
