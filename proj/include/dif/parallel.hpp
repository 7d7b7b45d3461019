#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace dif {

// Thread count: explicit argument > DIF_THREADS env > hardware concurrency.
inline int resolve_threads(int requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("DIF_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(begin, end) over contiguous chunks of [0, n). Chunk boundaries
// depend only on n and n_chunks, so any per-chunk accumulation merged in
// chunk order is reproducible regardless of thread count.
inline void parallel_chunks(std::size_t n, int n_chunks, int threads,
                            const std::function<void(int chunk, std::size_t begin, std::size_t end)>& fn) {
    if (n == 0 || n_chunks <= 0) return;
    n_chunks = static_cast<int>(std::min<std::size_t>(n_chunks, n));
    auto chunk_range = [&](int c) {
        std::size_t b = n * static_cast<std::size_t>(c) / n_chunks;
        std::size_t e = n * static_cast<std::size_t>(c + 1) / n_chunks;
        return std::pair<std::size_t, std::size_t>(b, e);
    };
    threads = std::max(1, std::min(threads, n_chunks));
    if (threads == 1) {
        for (int c = 0; c < n_chunks; ++c) {
            auto [b, e] = chunk_range(c);
            fn(c, b, e);
        }
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                int c = next.fetch_add(1);
                if (c >= n_chunks) break;
                auto [b, e] = chunk_range(c);
                fn(c, b, e);
            }
        });
    }
    for (auto& th : pool) th.join();
}

// Simple index-parallel loop, no reduction.
inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t)>& fn) {
    int chunks = std::max(1, threads) * 4;
    parallel_chunks(n, chunks, threads, [&](int, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) fn(i);
    });
}

} // namespace dif
