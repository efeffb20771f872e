#ifndef LRP_WALK_WINDOW_STEP_HPP
#define LRP_WALK_WINDOW_STEP_HPP

#include "lrp/model.hpp"
#include "lrp/rng.hpp"

namespace lrp::detail {

// Uniform step over the Z-edges at x. Returns false when the chosen edge
// leaves the window (x is then unchanged).
inline bool window_step(const Environment& env, Vertex& x, CounterRng& rng) {
  const auto nb = env.long_neighbors(x);
  auto u = rng.below(static_cast<std::uint64_t>(env.full_degree(x)));
  if (x > env.lo()) {
    if (u == 0) {
      --x;
      return true;
    }
    --u;
  }
  if (x + 1 < env.hi()) {
    if (u == 0) {
      ++x;
      return true;
    }
    --u;
  }
  if (u < nb.size()) {
    x = nb[u];
    return true;
  }
  return false;
}

}  // namespace lrp::detail

#endif
