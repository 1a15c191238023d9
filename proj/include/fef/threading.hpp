#pragma once

#include <cstdint>
#include <functional>

namespace fef {

// Number of worker threads used by parallel_for. Defaults to the hardware
// concurrency, overridable via set_num_threads or the FEF_THREADS env var.
int num_threads();
void set_num_threads(int n);

// Runs fn(i) for i in [0, n). Iterations must write disjoint memory; the
// work split is a deterministic block partition so results do not depend
// on scheduling.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

// Block variant: fn(begin, end) per worker chunk. Cheaper when per-index
// dispatch overhead matters.
void parallel_for_blocked(int64_t n,
                          const std::function<void(int64_t, int64_t)>& fn);

}  // namespace fef
