#pragma once

#include <cstdint>
#include <functional>

namespace gazecl::numcore {

// Worker count used by parallel_for. 1 means strict sequential execution
// (everything runs inline on the calling thread); 0 resolves to the
// hardware thread count.
void set_num_threads(int n);
int num_threads();

// Splits [0, n) into contiguous chunks, one per worker. Each index is
// processed by exactly one thread and chunk interiors run in ascending
// order, so results are bit-identical for every worker count as long as
// the chunks write disjoint outputs.
void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& body);

}  // namespace gazecl::numcore
