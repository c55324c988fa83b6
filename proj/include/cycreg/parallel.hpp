#pragma once

#include <cstdint>
#include <functional>

namespace cycreg {

/// Caps the number of worker threads used by per-voxel loops. Results are
/// independent of the thread count: parallel loops only ever write each
/// element from exactly one iteration, and reductions stay sequential.
void set_thread_count(int n);
int thread_count();

/// Runs body(i) for i in [0, n). Chunked across threads when thread_count()>1.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& body);

}  // namespace cycreg
