#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace bcs::detail {

/// Runs f(i) for i in [0, count) on up to `threads` workers using static
/// contiguous chunks. Each index must write only its own output slot, which
/// keeps results independent of the thread count. The exception from the
/// lowest-numbered failing chunk is rethrown.
template <class F>
void parallel_for(Eigen::Index count, int threads, F&& f) {
  if (threads <= 1 || count < 2) {
    for (Eigen::Index i = 0; i < count; ++i) f(i);
    return;
  }
  const auto workers = static_cast<Eigen::Index>(std::min<Eigen::Index>(threads, count));
  const Eigen::Index chunk = (count + workers - 1) / workers;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (Eigen::Index t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        const Eigen::Index end = std::min(count, (t + 1) * chunk);
        for (Eigen::Index i = t * chunk; i < end; ++i) f(i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace bcs::detail
