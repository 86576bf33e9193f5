#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <optional>
#include <thread>
#include <vector>

namespace sps {

// Worker count: explicit request, else SPS_WORKERS, else hardware concurrency.
int resolve_workers(int requested);

// Computes produce(i) for i in [0, count) on up to `workers` threads and hands
// each result to consume(i, result) strictly in index order, so any reduction
// done in consume is independent of the worker count. Results are produced in
// blocks of `workers * block_factor` to bound memory. The first exception
// thrown by produce is rethrown on the calling thread.
template <typename Produce, typename Consume>
void ordered_parallel_for(std::size_t count, int workers, Produce&& produce, Consume&& consume,
                          std::size_t block_factor = 4)
{
    using Result = decltype(produce(std::size_t{}));
    const auto n_workers = static_cast<std::size_t>(std::max(1, workers));
    const std::size_t block = n_workers * std::max<std::size_t>(1, block_factor);

    std::vector<std::optional<Result>> slots;
    for (std::size_t begin = 0; begin < count; begin += block) {
        const std::size_t end = std::min(count, begin + block);
        slots.clear();
        slots.resize(end - begin);
        if (n_workers == 1) {
            for (std::size_t i = begin; i < end; ++i) {
                slots[i - begin].emplace(produce(i));
            }
        } else {
            std::vector<std::exception_ptr> errors(n_workers);
            std::vector<std::thread> threads;
            threads.reserve(n_workers);
            for (std::size_t w = 0; w < n_workers; ++w) {
                threads.emplace_back([&, w] {
                    try {
                        for (std::size_t i = begin + w; i < end; i += n_workers) {
                            slots[i - begin].emplace(produce(i));
                        }
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
            }
            for (auto& t : threads) {
                t.join();
            }
            for (const auto& e : errors) {
                if (e) {
                    std::rethrow_exception(e);
                }
            }
        }
        for (std::size_t i = begin; i < end; ++i) {
            consume(i, std::move(*slots[i - begin]));
        }
    }
}

} // namespace sps
