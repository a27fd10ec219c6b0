#pragma once

#include <cstddef>
#include <functional>

namespace pancolor {

// Runs fn(i) for every i in [0, n) across up to `threads` workers (0 means
// hardware concurrency). Workers own disjoint index ranges, so results keyed
// by index are deterministic regardless of scheduling; the first exception
// thrown by any worker is rethrown after the join.
void parallel_for(size_t n, const std::function<void(size_t)>& fn, unsigned threads = 0);

}  // namespace pancolor
