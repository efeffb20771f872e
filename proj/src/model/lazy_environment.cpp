#include <algorithm>

#include "lrp/model.hpp"

namespace lrp {

LazyEnvironment::LazyEnvironment(double beta, std::uint64_t seed, bool long_edges)
    : beta_(beta), seed_(seed), long_edges_(long_edges) {
  ModelParams{beta, 0, 2}.validate();
}

// Tiles are regenerated on every reveal rather than cached: a tile costs a
// handful of draws, while a cache would hold ~3 tiles per scale per vertex.
const std::vector<Vertex>& LazyEnvironment::reveal(Vertex x) {
  std::lock_guard lock(mutex_);
  if (auto it = revealed_.find(x); it != revealed_.end()) return it->second;
  std::vector<Vertex> neighbours;
  if (long_edges_) {
    std::vector<Edge> tile;
    for (int scale = 1; scale <= detail::kMaxScale; ++scale) {
      const std::int64_t width = std::int64_t{1} << scale;
      tile.clear();
      detail::tile_edges(beta_, seed_, scale, detail::floor_div(x, width), tile);
      for (const auto& e : tile) {
        if (e.a == x) neighbours.push_back(e.b);
      }
      // <i, x> with x - i in [width, 2 width)
      const std::int64_t first = detail::floor_div(x - 2 * width + 1, width);
      const std::int64_t last = detail::floor_div(x - width, width);
      for (std::int64_t block = first; block <= last; ++block) {
        tile.clear();
        detail::tile_edges(beta_, seed_, scale, block, tile);
        for (const auto& e : tile) {
          if (e.b == x) neighbours.push_back(e.a);
        }
      }
    }
    std::sort(neighbours.begin(), neighbours.end());
  }
  return revealed_.emplace(x, std::move(neighbours)).first->second;
}

std::size_t LazyEnvironment::revealed_count() const {
  std::lock_guard lock(mutex_);
  return revealed_.size();
}

}  // namespace lrp
