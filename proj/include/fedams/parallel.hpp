#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace fedams {

struct ExecPolicy {
  int threads = 1;
};

// Runs fn(i) for i in [0, n). With threads > 1 the indices are spread over an
// OpenMP team; fn must only write state owned by index i. The first exception
// (lowest index) is rethrown after the loop.
template <class Fn>
void parallel_for(const ExecPolicy& policy, std::size_t n, Fn&& fn) {
  if (policy.threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> failures(n);
  const long long count = static_cast<long long>(n);
#pragma omp parallel for num_threads(policy.threads) schedule(static)
  for (long long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      failures[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
}

}  // namespace fedams
