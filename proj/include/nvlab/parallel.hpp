#pragma once

#include <cstddef>
#include <functional>

namespace nvlab {

// Runs body(i) for i in [0, n) on up to `workers` threads. Each index is
// processed by exactly one worker; bodies write only to their own slot, so the
// result is identical for any worker count. workers <= 1 runs inline.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body);

}  // namespace nvlab
