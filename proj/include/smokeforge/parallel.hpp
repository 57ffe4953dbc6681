#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace smokeforge::parallel
{
    // Number of worker threads used by the data-parallel kernels. 0 means
    // "hardware default". Results never depend on this value: work is always
    // split into the same fixed chunks and reductions combine per-chunk
    // partials in chunk order.
    void set_thread_count(std::size_t threads);
    std::size_t thread_count();

    // Runs body(chunk) for chunk in [0, chunks). Each chunk must write only
    // to memory it owns.
    void for_each_chunk(std::size_t chunks, const std::function<void(std::size_t)> &body);

    // Deterministic sum: partial(chunk) is evaluated for every chunk (in
    // parallel) and the partials are added in ascending chunk order.
    double sum_chunks(std::size_t chunks, const std::function<double(std::size_t)> &partial);

    // Deterministic max over chunks.
    double max_chunks(std::size_t chunks, const std::function<double(std::size_t)> &partial);
} // namespace smokeforge::parallel
