#include "lrp/parallel.hpp"

namespace lrp {

namespace {
std::atomic<int> configured{0};
}

int default_threads() {
  const int set = configured.load(std::memory_order_relaxed);
  if (set > 0) return set;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void set_default_threads(int threads) { configured.store(threads > 0 ? threads : 0); }

}  // namespace lrp
