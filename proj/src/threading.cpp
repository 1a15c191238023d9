#include "fef/threading.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace fef {

namespace {
int g_threads = 0;

int detect_threads() {
  if (const char* env = std::getenv("FEF_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}
}  // namespace

int num_threads() {
  if (g_threads <= 0) g_threads = detect_threads();
  return g_threads;
}

void set_num_threads(int n) { g_threads = n > 0 ? n : 0; }

void parallel_for_blocked(int64_t n,
                          const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  int nt = num_threads();
  if (nt <= 1 || n == 1) {
    fn(0, n);
    return;
  }
  int workers = static_cast<int>(std::min<int64_t>(nt, n));
  int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int w = 1; w < workers; ++w) {
    int64_t b = w * chunk, e = std::min<int64_t>(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(0, std::min<int64_t>(n, chunk));
  for (auto& t : pool) t.join();
}

void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
  parallel_for_blocked(n, [&fn](int64_t b, int64_t e) {
    for (int64_t i = b; i < e; ++i) fn(i);
  });
}

}  // namespace fef
