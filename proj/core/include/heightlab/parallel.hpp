#pragma once

#include <cstddef>
#include <functional>

namespace heightlab {

/// Number of workers used by parallel_for. Defaults to the hardware
/// concurrency, capped by the HEIGHTLAB_THREADS environment variable.
std::size_t worker_count();

/// Overrides the worker count for the current process (0 restores the
/// environment/hardware default). Mainly for tests.
void set_worker_count(std::size_t n);

/// Runs body(i) for i in [0, n). Each index is visited exactly once; the
/// assignment of indices to threads is unspecified, so body must only write
/// to storage owned by index i. Results are therefore independent of the
/// worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace heightlab
