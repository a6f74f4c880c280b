#include "frame_sampler/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string_view>
#include <thread>
#include <vector>

namespace frame_sampler {

std::size_t worker_count(std::size_t fallback) {
    if (const char *env = std::getenv("FRAME_SAMPLER_THREADS")) {
        const std::string_view text{env};
        std::size_t value = 0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec == std::errc{} && ptr == text.data() + text.size() && value > 0) {
            return value;
        }
    }
    return std::max<std::size_t>(fallback, 1);
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)> &body) {
    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const auto i = next.fetch_add(1);
            if (i >= count || stop.load()) {
                return;
            }
            try {
                body(i);
            } catch (...) {
                const std::lock_guard lock{error_mutex};
                if (!error) {
                    error = std::current_exception();
                }
                stop = true;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back(worker);
    }
    for (auto &t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace frame_sampler
