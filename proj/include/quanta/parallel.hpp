#pragma once

#include <cstdint>
#include <functional>

namespace quanta {

// Global worker count used by parallel_for. Numerical results never depend
// on it: work is partitioned by output element, and each element is computed
// by exactly one worker with a fixed interior loop order.
void set_thread_count(int n);
int thread_count();

// Runs body(lo, hi) over a partition of [begin, end). Ranges are contiguous
// and disjoint. Calls from inside a worker run inline (no nesting).
void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& body);

}  // namespace quanta
