#pragma once

namespace npl {

/// Kernels with a data-parallel loop take this switch. `serial` is the plain
/// reference loop kept for tests and benchmarks; `parallel` is the OpenMP
/// kernel, whose output never depends on the thread count.
enum class Execution { serial, parallel };

/// Threads OpenMP would use for a parallel region (1 without OpenMP).
int max_threads();

} // namespace npl
