#pragma once

#include <cstddef>
#include <functional>

namespace spharm {

/// Runs fn(0) .. fn(n-1) on up to `threads` workers. Each index must write
/// only to its own output slot; callers reduce afterwards in index order,
/// which keeps results independent of the worker count. If any call throws,
/// the exception of the lowest failing index is rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace spharm
