#include "vild/parallel.hpp"

#include <omp.h>

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <cstring>

namespace vild {

namespace {
std::atomic<int> g_threads{0};
}

int max_threads() {
  const int t = g_threads.load();
  return t > 0 ? t : omp_get_max_threads();
}

void set_max_threads(int threads) { g_threads.store(threads > 0 ? threads : 0); }

int apply_thread_env() {
  if (const char* env = std::getenv("VILD_THREADS")) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), value);
    if (ec == std::errc() && value > 0) set_max_threads(value);
  }
  return max_threads();
}

}  // namespace vild
