#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace des {

/// Worker count: DES_THREADS if set (min 1), else hardware concurrency.
inline unsigned max_threads() {
    if (const char* env = std::getenv("DES_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
        return 1;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

/// Runs fn(begin, end) over [0, n) in fixed chunks of `chunk` elements.
/// The chunk boundaries depend only on n and chunk — never on the thread
/// count — so per-chunk work that writes disjoint output slots produces
/// identical results under any DES_THREADS setting.
inline void parallel_for(std::size_t n,
                         const std::function<void(std::size_t, std::size_t)>& fn,
                         std::size_t chunk = 256) {
    if (n == 0) return;
    const std::size_t nchunks = (n + chunk - 1) / chunk;
    const std::size_t nthreads =
        std::min<std::size_t>(max_threads(), nchunks);
    if (nthreads <= 1) {
        for (std::size_t c = 0; c < nchunks; ++c)
            fn(c * chunk, std::min(n, (c + 1) * chunk));
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= nchunks) return;
            try {
                fn(c * chunk, std::min(n, (c + 1) * chunk));
            } catch (...) {
                const std::lock_guard<std::mutex> lock(err_mu);
                if (!err) err = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace des
