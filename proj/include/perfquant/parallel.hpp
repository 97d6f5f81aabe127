// Minimal fork-join helper. Worker count is capped by PERFQUANT_THREADS.
#pragma once

#include <functional>

namespace perfquant {

/// Number of workers used by parallel_for: hardware concurrency, capped by
/// the PERFQUANT_THREADS environment variable when set.
int worker_count();

/// Runs fn(i) for i in [0, n). Iterations must write to disjoint state;
/// results are then independent of scheduling.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace perfquant
