#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#include "toolwatch/common.hpp"

namespace toolwatch::detail {

/// Runs body(i) for i in [0, n). The parallel path uses an OpenMP loop; the first
/// exception thrown by any iteration is rethrown after the loop completes.
template <class Body>
void for_each_index(std::size_t n, Execution exec, Body&& body) {
    if (exec == Execution::serial) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr first;
    std::once_flag once;
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            std::call_once(once, [&] { first = std::current_exception(); });
        }
    }
    if (first) std::rethrow_exception(first);
}

}  // namespace toolwatch::detail
