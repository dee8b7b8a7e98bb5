#ifndef COUNTERFACT_PARALLEL_HPP
#define COUNTERFACT_PARALLEL_HPP

#include "counterfact/common.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace counterfact
{

/// Worker count: `requested` (0 = hardware concurrency), capped by COUNTERFACT_THREADS.
inline unsigned resolve_threads(unsigned requested = 0)
{
    unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("COUNTERFACT_THREADS"); env && *env) {
        long cap = 0;
        try {
            cap = parse_int(env);
        }
        catch (const DataError&) {
            throw ConfigError(std::string("COUNTERFACT_THREADS must be a positive integer, got '") + env + "'");
        }
        if (cap < 1) {
            throw ConfigError("COUNTERFACT_THREADS must be a positive integer");
        }
        n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
    return n;
}

/// Calls f(i) for i in [0, n) on up to `threads` workers. The first exception is rethrown.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& f)
{
    threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            f(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    f(i);
                }
                catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace counterfact

#endif // COUNTERFACT_PARALLEL_HPP
