#include "moenet/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace moenet {

namespace {

std::size_t jobs_from_env() {
    for (const char* name : {"MULTIOMIC_ENET_JOBS", "MOENET_JOBS"}) {
        if (const char* v = std::getenv(name)) {
            try {
                long n = std::stol(v);
                if (n > 0) return static_cast<std::size_t>(n);
            } catch (...) {
            }
        }
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

std::atomic<std::size_t> g_jobs{0};
thread_local bool t_inside_worker = false;

}  // namespace

std::size_t worker_count() {
    std::size_t j = g_jobs.load();
    if (j == 0) {
        j = jobs_from_env();
        g_jobs.store(j);
    }
    return j;
}

void set_worker_count(std::size_t jobs) { g_jobs.store(std::max<std::size_t>(1, jobs)); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    if (n == 0) return;
    std::vector<std::exception_ptr> errors(n);
    const std::size_t threads = t_inside_worker ? 1 : std::min(worker_count(), n);

    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            t_inside_worker = true;
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
            t_inside_worker = false;
        };
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace moenet
