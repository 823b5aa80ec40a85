#include "tdnoise/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace tdn {

namespace {
std::atomic<unsigned> g_cap{0};

unsigned default_cap() {
  if (const char* env = std::getenv("TDNOISE_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}
}  // namespace

void set_thread_cap(unsigned threads) { g_cap.store(threads); }

unsigned thread_cap() {
  const unsigned cap = g_cap.load();
  return cap > 0 ? cap : default_cap();
}

}  // namespace tdn
