#pragma once

#include <cstdint>
#include <functional>

#include "medn/types.hpp"

namespace medn {

/// 0 means every hardware thread.
int resolve_threads(int requested);

/// Runs body(i) for i in [0, n) over contiguous blocks on up to `threads`
/// workers. Results must not depend on scheduling; the first exception thrown
/// by any worker is rethrown on the caller.
void parallel_for(Index n, int threads, const std::function<void(Index)>& body);

/// SplitMix64 finalizer, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace medn
