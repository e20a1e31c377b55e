#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace bsdelab {

// Global worker count for all parallel loops. Results never depend on it:
// work is cut into fixed-size blocks and all reductions run in a fixed
// association order.
int thread_count();
void set_thread_count(int n);

constexpr std::size_t kPathBlock = 4096;

std::size_t block_count(std::size_t n, std::size_t block_size = kPathBlock);

// Runs fn(begin, end, block_index) over consecutive blocks of size
// block_size. Blocks must write to disjoint state.
void parallel_blocks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn,
                     std::size_t block_size = kPathBlock);

// Sum with a fixed pairwise association tree; independent of thread layout
// and better conditioned than a running sum.
double pairwise_sum(std::span<const double> v);

// Mean and (unbiased) sample standard deviation via pairwise sums.
struct MeanStd {
  double mean = 0.0;
  double sd = 0.0;
};
MeanStd mean_std(std::span<const double> v);

}  // namespace bsdelab
