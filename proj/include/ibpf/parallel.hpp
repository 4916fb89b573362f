// Copyright 2026 The ibpf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <exception>

#ifdef IBPF_HAVE_OPENMP
#include <omp.h>
#endif

namespace ibpf {

/// Sets the worker count for particle-parallel loops (0 keeps the default).
void set_thread_count(int threads);
int thread_count();

/// Runs f(i) for i in [0, n). Work is split statically; the first exception
/// thrown by any iteration is rethrown on the calling thread.
template <class F>
void parallel_for(std::size_t n, F&& f) {
#ifdef IBPF_HAVE_OPENMP
    std::exception_ptr error;
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        try {
            f(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(ibpf_parallel_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
#else
    for (std::size_t i = 0; i < n; ++i) f(i);
#endif
}

}  // namespace ibpf
