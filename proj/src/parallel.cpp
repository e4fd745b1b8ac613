#include "pcn/parallel.hpp"

#include <atomic>

#ifdef PCN_OPENMP
#include <omp.h>
#endif

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace pcn {

namespace {

std::atomic<int> g_threads{0};

#ifdef __GLIBC__
// Large activation buffers churn every training step; keep them on the heap
// instead of round-tripping through mmap (which re-zeroes pages).
struct MallocTuning {
  MallocTuning() {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
  }
};
const MallocTuning g_malloc_tuning;
#endif

}  // namespace

void set_num_threads(int n) { g_threads.store(n < 0 ? 0 : n); }

int num_threads() {
  int n = g_threads.load();
#ifdef PCN_OPENMP
  if (n == 0) n = omp_get_max_threads();
#else
  if (n == 0) n = 1;
#endif
  return n;
}

void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
#ifdef PCN_OPENMP
  int nt = num_threads();
  if (nt > 1 && n > 1) {
#pragma omp parallel for schedule(static) num_threads(nt)
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
#endif
  for (int64_t i = 0; i < n; ++i) fn(i);
}

}  // namespace pcn
