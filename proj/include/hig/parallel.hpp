#pragma once

#include <cstddef>

#include <exception>
#include <functional>

namespace hig {

// Worker cap shared by the parallel phases (generation, inference). 1 by
// default; results are index-deterministic at any setting.
int max_threads();
void set_max_threads(int n);

// Runs fn(i) for i in [0, n), spreading indices over at most max_threads()
// workers. Rethrows the lowest-index exception after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace hig
