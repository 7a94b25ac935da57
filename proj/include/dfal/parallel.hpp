#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace dfal {

/// Selects the serial reference loop or the OpenMP kernel. Both produce
/// identical results; every parallel kernel writes to a preallocated slot
/// per index and never reduces across indices.
enum class Execution { serial, parallel };

/// Calls f(i) for i in [0, n). Exceptions thrown by f are rethrown on the
/// calling thread (the first one wins).
template <typename F>
void for_each_index(std::size_t n, Execution exec, F&& f) {
  if (exec == Execution::serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    try {
      f(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace dfal
