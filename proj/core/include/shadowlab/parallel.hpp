#pragma once

#include <cstddef>
#include <functional>

namespace shadowlab {

// Process-wide worker budget used by filters, metrics, and training. Values < 1 mean 1.
void set_worker_threads(int threads) noexcept;
int worker_threads() noexcept;

// Splits [0, n) into contiguous chunks, one per worker. Callers write results into
// per-index slots, so the outcome never depends on the worker count. Nested calls from
// inside a worker run inline.
void parallel_for(std::size_t n, const std::function<void(std::size_t begin, std::size_t end)>& body);

}  // namespace shadowlab
