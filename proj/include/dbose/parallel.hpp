#pragma once

#include <cstddef>
#include <functional>

namespace dbose {

// Worker count: DBOSE_THREADS env var, else hardware concurrency.
int worker_count();

// Run f(i) for i in [0, n) on the worker pool. Callers keep determinism by
// writing to disjoint slots and reducing sequentially afterwards.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f);

}  // namespace dbose
