// Copyright 2026 the vcx authors
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

#ifndef VCX_UTIL_PARALLEL_HPP_
#define VCX_UTIL_PARALLEL_HPP_

#include <algorithm>
#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace vcx {

/// Runs fn(i) for i in [0, n). Work items must be independent; any result
/// merging has to happen afterwards in index order so that outputs do not
/// depend on the number of workers.
inline void parallel_for(size_t n, int num_threads, const std::function<void(size_t)>& fn) {
  if (n == 0) return;
  int workers = std::max(1, num_threads);
  workers = static_cast<int>(std::min<size_t>(workers, n));
  if (workers == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&]() {
      for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline int default_threads() {
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace vcx

#endif  // VCX_UTIL_PARALLEL_HPP_
