#pragma once

#include <cstdint>
#include <functional>

namespace pcn {

// Process-wide worker count for operator internals. 0 = library default.
// Results are bit-identical for any setting: parallel loops partition work
// into fixed chunks whose outputs do not overlap, and reductions are summed
// in fixed chunk order on one thread.
void set_num_threads(int n);
int num_threads();

// Runs fn(i) for i in [0, n). Each index is executed exactly once; no two
// invocations write the same output location by contract of the caller.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

}  // namespace pcn
