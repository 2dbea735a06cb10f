// Copyright 2026 The rkgrape Authors
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
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rkgrape {

/// How independent work items (branches, sweep points) are scheduled.
/// Results never depend on the choice: every item writes its own slot and
/// reductions run afterwards in index order.
enum class Execution { serial, parallel };

inline int available_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// Runs fn(i) for i in [0, n). Rethrows the exception of the lowest failing
/// index once all items have finished.
template <typename Fn>
void for_each_index(std::size_t n, Execution exec, Fn&& fn, int threads = 0) {
  std::vector<std::exception_ptr> errors(n);
  const long count = static_cast<long>(n);
  const bool par = exec == Execution::parallel && n > 1;
#ifdef _OPENMP
  const int nthreads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) if (par) num_threads(nthreads)
#else
  (void)threads;
  (void)par;
#endif
  for (long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace rkgrape
