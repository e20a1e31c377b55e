#include "bsdelab/parallel.hpp"

#include <atomic>
#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

namespace bsdelab {

namespace {
int g_threads = []() {
  unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw, 1u, 8u));
}();
}  // namespace

int thread_count() { return g_threads; }

void set_thread_count(int n) { g_threads = std::clamp(n, 1, 64); }

std::size_t block_count(std::size_t n, std::size_t block_size) {
  return (n + block_size - 1) / block_size;
}

void parallel_blocks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn,
                     std::size_t block_size) {
  if (n == 0) return;
  const std::size_t nblocks = block_count(n, block_size);
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(g_threads), nblocks);
  if (workers <= 1) {
    for (std::size_t b = 0; b < nblocks; ++b) {
      fn(b * block_size, std::min(n, (b + 1) * block_size), b);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= nblocks) return;
      fn(b * block_size, std::min(n, (b + 1) * block_size), b);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

MeanStd mean_std(std::span<const double> v) {
  MeanStd out;
  if (v.empty()) return out;
  out.mean = pairwise_sum(v) / static_cast<double>(v.size());
  if (v.size() < 2) return out;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double c = v[i] - out.mean;
    sq[i] = c * c;
  }
  out.sd = std::sqrt(pairwise_sum(sq) / static_cast<double>(v.size() - 1));
  return out;
}

}  // namespace bsdelab
