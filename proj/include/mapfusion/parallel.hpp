#pragma once

#include <cstddef>
#include <functional>

namespace mapfusion {

/// Worker cap for intra-operation parallelism. Results never depend on it:
/// every parallel loop partitions work into fixed-size chunks whose
/// reductions are combined in chunk order.
void set_num_threads(int n);
int num_threads();

/// Resolve a thread count from an explicit flag value (>0 wins) or the
/// MAPFUSION_THREADS environment variable, defaulting to 1.
int resolve_thread_count(int flag_value);

/// Run fn(i) for i in [0, n) across the configured workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace mapfusion
