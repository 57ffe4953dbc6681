#include "smokeforge/parallel.hpp"

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/partitioner.h>
#include <tbb/task_arena.h>

#include <algorithm>
#include <atomic>
#include <memory>
#include <mutex>

namespace smokeforge::parallel
{
    namespace
    {
        std::mutex g_arena_mutex;
        std::size_t g_threads = 0;
        std::shared_ptr<tbb::task_arena> g_arena;

        std::shared_ptr<tbb::task_arena> arena()
        {
            std::lock_guard lock(g_arena_mutex);
            if (!g_arena)
            {
                g_arena = g_threads == 0 ? std::make_shared<tbb::task_arena>()
                                         : std::make_shared<tbb::task_arena>(static_cast<int>(g_threads));
            }
            return g_arena;
        }
    } // namespace

    void set_thread_count(std::size_t threads)
    {
        std::lock_guard lock(g_arena_mutex);
        g_threads = threads;
        g_arena.reset();
    }

    std::size_t thread_count()
    {
        return static_cast<std::size_t>(arena()->max_concurrency());
    }

    void for_each_chunk(std::size_t chunks, const std::function<void(std::size_t)> &body)
    {
        if (chunks == 0)
        {
            return;
        }
        if (chunks == 1)
        {
            body(0);
            return;
        }
        auto a = arena();
        a->execute([&] {
            tbb::parallel_for(
                tbb::blocked_range<std::size_t>(0, chunks, 1),
                [&](const tbb::blocked_range<std::size_t> &r) {
                    for (std::size_t c = r.begin(); c != r.end(); ++c)
                    {
                        body(c);
                    }
                },
                tbb::simple_partitioner{});
        });
    }

    double sum_chunks(std::size_t chunks, const std::function<double(std::size_t)> &partial)
    {
        std::vector<double> partials(chunks, 0.0);
        for_each_chunk(chunks, [&](std::size_t c) { partials[c] = partial(c); });
        double total = 0.0;
        for (double p : partials)
        {
            total += p;
        }
        return total;
    }

    double max_chunks(std::size_t chunks, const std::function<double(std::size_t)> &partial)
    {
        std::vector<double> partials(chunks, 0.0);
        for_each_chunk(chunks, [&](std::size_t c) { partials[c] = partial(c); });
        double best = 0.0;
        for (double p : partials)
        {
            best = std::max(best, p);
        }
        return best;
    }
} // namespace smokeforge::parallel
