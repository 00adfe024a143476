#pragma once

#include <exception>

namespace cqed {

/// Runs f(i) for i in [0, n) under an OpenMP static schedule. The first exception
/// thrown by any iteration is rethrown on the calling thread after the loop.
template <class F>
void parallel_for(long n, F&& f, bool enable = true) {
    std::exception_ptr error;
#pragma omp parallel for schedule(static) if (enable)
    for (long i = 0; i < n; ++i) {
        try {
            f(i);
        } catch (...) {
#pragma omp critical(cqed_parallel_for_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

/// Number of threads OpenMP will use for the next parallel region.
int max_threads();

/// Sets the OpenMP thread count; n <= 0 leaves the runtime default.
void set_threads(int n);

}  // namespace cqed
