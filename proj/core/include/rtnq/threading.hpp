// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>

namespace rtnq {

// Global worker count. Defaults to hardware concurrency; the CLI overrides it
// via --threads. Values are clamped to >= 1.
void set_threads(int n);
int threads();

// Runs fn(begin, end) over a static contiguous partition of [0, n). Falls back
// to a single inline call when the configured worker count is 1 or when
// n < min_items_per_worker. Workers write disjoint output ranges, so results
// are bit-identical for every thread count and schedule; callers must keep
// any accumulation for one output element inside one (begin, end) range.
void parallel_for(std::int64_t n, std::int64_t min_items_per_worker,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace rtnq
