// Copyright 2026 The MFLO Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mflo::detail {

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Work is split
/// into contiguous blocks, so callers that write only to slot i get results
/// independent of the thread count. The first exception thrown by any worker
/// is rethrown on the calling thread.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn &&fn) {
    if (count == 0) {
        return;
    }
    const std::size_t workers =
        std::clamp<std::size_t>(threads == 0 ? 1 : threads, 1, count);
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }

    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t block = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * block;
        const std::size_t end = std::min(count, begin + block);
        if (begin >= end) {
            break;
        }
        pool.emplace_back([&, begin, end] {
            try {
                for (std::size_t i = begin; i < end; ++i) {
                    fn(i);
                }
            } catch (...) {
                std::scoped_lock lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
            }
        });
    }
    pool.clear();
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace mflo::detail
