#pragma once

#include <cstddef>
#include <functional>

namespace moenet {

/// Number of worker threads used by parallel_for. Defaults to the value of
/// MOENET_JOBS / MULTIOMIC_ENET_JOBS or the number of logical cores.
std::size_t worker_count();
void set_worker_count(std::size_t jobs);

/// Runs body(i) for i in [0, n). Work is spread over worker_count() threads
/// unless the caller is itself running inside a parallel_for worker, in which
/// case the loop runs inline. Exceptions are captured per index and the one
/// with the lowest index is rethrown after all work has finished, so
/// results never depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace moenet
