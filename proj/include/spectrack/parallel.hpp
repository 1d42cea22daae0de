#pragma once

#include <cstddef>
#include <functional>

namespace spectrack::parallel {

// Worker count used by every parallel loop in the library. 0 is treated as 1.
void set_thread_count(unsigned count);
unsigned thread_count();

// Calls body(begin, end) over disjoint sub-ranges covering [0, n). Bodies must
// only write slots owned by their range; results then do not depend on the
// worker count. Nested calls from inside a worker run inline.
void for_ranges(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

// Deterministic sum of term(i) for i in [0, n): partial sums over fixed-size
// chunks are merged in chunk order, so the result is bitwise identical for
// any worker count.
double chunked_sum(std::size_t n, const std::function<double(std::size_t)>& term);

}  // namespace spectrack::parallel
