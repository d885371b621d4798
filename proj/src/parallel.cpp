#include "mtlab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace mtlab {

namespace {

std::atomic<int> g_override{0};
thread_local bool t_inside_worker = false;

int env_threads() {
    const char* env = std::getenv("MTLAB_THREADS");
    if (env == nullptr) return 1;
    try {
        int n = std::stoi(env);
        return n > 0 ? n : 1;
    } catch (const std::exception&) {
        return 1;
    }
}

}  // namespace

int thread_count() {
    int n = g_override.load();
    return n > 0 ? n : env_threads();
}

void set_thread_count(int n) { g_override.store(std::max(n, 0)); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    std::size_t workers = static_cast<std::size_t>(thread_count());
    workers = std::min(workers, n);
    if (workers <= 1 || t_inside_worker) {
        body(0, n);
        return;
    }

    std::vector<std::thread> pool;
    // One slot per chunk so the rethrown error is the lowest-index one.
    std::vector<std::exception_ptr> errors(workers);
    std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        std::size_t begin = w * chunk;
        std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&body, &errors, w, begin, end] {
            t_inside_worker = true;
            try {
                body(begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace mtlab
