#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace looplens {

// Runs fn(chunk_index, begin, end) over [0, n) split into `threads` contiguous
// chunks. Chunk boundaries depend only on (n, threads); callers that write
// results into per-chunk slots and concatenate in chunk order therefore get
// output independent of scheduling. The first exception thrown by any chunk
// is rethrown on the calling thread.
inline void parallel_chunks(std::size_t n, int threads,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (threads < 1) threads = 1;
    std::size_t nthreads = std::min<std::size_t>(std::size_t(threads), n == 0 ? 1 : n);
    if (nthreads <= 1) {
        fn(0, 0, n);
        return;
    }
    std::size_t base = n / nthreads;
    std::size_t rem = n % nthreads;
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(nthreads);
    std::size_t begin = 0;
    for (std::size_t c = 0; c < nthreads; ++c) {
        std::size_t len = base + (c < rem ? 1 : 0);
        std::size_t end = begin + len;
        pool.emplace_back([&fn, &errors, c, begin, end] {
            try {
                fn(c, begin, end);
            } catch (...) {
                errors[c] = std::current_exception();
            }
        });
        begin = end;
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace looplens
