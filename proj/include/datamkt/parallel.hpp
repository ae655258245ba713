// Copyright 2026 The datamkt Authors
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

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace datamkt {

/// Resolves a thread-count knob: n >= 1 is taken literally, n <= 0 means
/// "use the hardware concurrency".
inline int resolve_threads(int threads) {
  if (threads >= 1) return threads;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

struct ChunkRange {
  std::size_t index = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Splits [0, count) into at most `threads` contiguous chunks in index order.
/// The split depends only on (count, threads), never on scheduling, so
/// chunk-indexed accumulators merge deterministically.
inline std::vector<ChunkRange> make_chunks(std::size_t count, int threads) {
  const std::size_t t = std::min<std::size_t>(
      static_cast<std::size_t>(resolve_threads(threads)),
      std::max<std::size_t>(count, 1));
  const std::size_t chunk = (count + t - 1) / t;
  std::vector<ChunkRange> out;
  for (std::size_t w = 0; w < t; ++w) {
    const std::size_t begin = std::min(count, chunk * w);
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    out.push_back(ChunkRange{w, begin, end});
  }
  if (out.empty()) out.push_back(ChunkRange{0, 0, 0});
  return out;
}

/// Runs body on every chunk, one worker thread per chunk (inline when there is
/// only one). The first exception thrown by any worker is rethrown.
inline void run_chunks(const std::vector<ChunkRange>& chunks,
                       const std::function<void(const ChunkRange&)>& body) {
  if (chunks.size() <= 1) {
    for (const ChunkRange& c : chunks) body(c);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(chunks.size());
  std::vector<std::exception_ptr> errors(chunks.size());
  for (std::size_t w = 0; w < chunks.size(); ++w) {
    workers.emplace_back([&, w] {
      try {
        body(chunks[w]);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& worker : workers) worker.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

}  // namespace datamkt
