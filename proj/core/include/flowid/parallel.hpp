#pragma once

#include <cstddef>
#include <functional>

namespace flowid {

/// Worker count used by parallel_for; defaults to std::thread::hardware_concurrency().
std::size_t thread_count() noexcept;
/// 0 restores the default.
void set_thread_count(std::size_t threads) noexcept;

/// Runs fn(i) for every i in [0, count). Each index must write only its own
/// output slot; the first exception thrown is rethrown on the caller.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace flowid
