#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "lrp/errors.hpp"
#include "lrp/model.hpp"

namespace lrp {

namespace {

std::vector<int> boundary_only(std::int64_t length) {
  std::vector<int> outside(static_cast<std::size_t>(length), 0);
  outside.front() += 1;
  outside.back() += 1;
  return outside;
}

std::string edge_text(Vertex a, Vertex b) {
  return "<" + std::to_string(a) + "," + std::to_string(b) + ">";
}

}  // namespace

Environment Environment::from_edges(const ModelParams& params, std::uint64_t seed,
                                    std::vector<Edge> edges, std::vector<int> outside) {
  params.validate();
  for (auto& e : edges) {
    if (e.a > e.b) std::swap(e.a, e.b);
    if (e.b - e.a <= 1) {
      throw ConfigError("long edge " + edge_text(e.a, e.b) + " has length <= 1");
    }
    if (e.a < params.window_lo || e.b >= params.window_hi) {
      throw ConfigError("long edge " + edge_text(e.a, e.b) + " leaves the window");
    }
  }
  std::sort(edges.begin(), edges.end());
  if (auto dup = std::adjacent_find(edges.begin(), edges.end()); dup != edges.end()) {
    throw ConfigError("duplicate long edge " + edge_text(dup->a, dup->b));
  }
  if (outside.empty()) {
    outside = boundary_only(params.length());
  } else if (static_cast<std::int64_t>(outside.size()) != params.length()) {
    throw ConfigError("outside-degree table does not match the window length");
  }
  Environment env;
  env.params_ = params;
  env.seed_ = seed;
  env.edges_ = std::move(edges);
  env.outside_ = std::move(outside);
  env.build_adjacency();
  return env;
}

Environment Environment::pure_path(Vertex lo, Vertex hi) {
  ModelParams params;
  params.beta = 1.0;
  params.window_lo = lo;
  params.window_hi = hi;
  return from_edges(params, 0, {});
}

void Environment::build_adjacency() {
  const auto n = static_cast<std::size_t>(size());
  offsets_.assign(n + 1, 0);
  for (const auto& e : edges_) {
    ++offsets_[static_cast<std::size_t>(e.a - lo()) + 1];
    ++offsets_[static_cast<std::size_t>(e.b - lo()) + 1];
  }
  for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] += offsets_[i];
  neighbors_.assign(static_cast<std::size_t>(offsets_[n]), 0);
  std::vector<std::int64_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (const auto& e : edges_) {
    neighbors_[static_cast<std::size_t>(fill[static_cast<std::size_t>(e.a - lo())]++)] = e.b;
    neighbors_[static_cast<std::size_t>(fill[static_cast<std::size_t>(e.b - lo())]++)] = e.a;
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(neighbors_.begin() + offsets_[i], neighbors_.begin() + offsets_[i + 1]);
  }
}

std::span<const Vertex> Environment::long_neighbors(Vertex x) const {
  if (!contains(x)) throw DomainError("vertex " + std::to_string(x) + " outside the window");
  const auto i = static_cast<std::size_t>(x - lo());
  return {neighbors_.data() + offsets_[i], static_cast<std::size_t>(offsets_[i + 1] - offsets_[i])};
}

bool Environment::has_long_edge(Vertex a, Vertex b) const {
  if (!contains(a) || !contains(b)) return false;
  const auto nb = long_neighbors(a);
  return std::binary_search(nb.begin(), nb.end(), b);
}

int Environment::degree(Vertex x) const {
  const auto nb = long_neighbors(x);
  return static_cast<int>(nb.size()) + (x > lo() ? 1 : 0) + (x + 1 < hi() ? 1 : 0);
}

int Environment::outside_degree(Vertex x) const {
  if (!contains(x)) throw DomainError("vertex " + std::to_string(x) + " outside the window");
  return outside_[static_cast<std::size_t>(x - lo())];
}

Environment Environment::with_edge(Vertex a, Vertex b) const {
  if (a > b) std::swap(a, b);
  if (b - a <= 1 || !contains(a) || !contains(b)) {
    throw DomainError("cannot add long edge " + edge_text(a, b));
  }
  if (has_long_edge(a, b)) throw DomainError("edge " + edge_text(a, b) + " already present");
  std::vector<Edge> edges = edges_;
  edges.push_back(Edge{a, b});
  return from_edges(params_, seed_, std::move(edges), outside_);
}

Environment Environment::without_long_edges() const {
  return from_edges(params_, seed_, {});
}

Environment sample_environment(const ModelParams& params, std::uint64_t seed) {
  params.validate();
  const Vertex lo = params.window_lo;
  const Vertex hi = params.window_hi;
  std::vector<Edge> edges;
  std::vector<int> outside = boundary_only(params.length());
  std::vector<Edge> tile;
  for (int scale = 1; scale <= detail::kMaxScale; ++scale) {
    const std::int64_t width = std::int64_t{1} << scale;
    // A pair <i, i+k>, k < 2 width, touches the window iff i is in
    // [lo - 2 width + 1, hi - 1].
    const std::int64_t first = detail::floor_div(lo - 2 * width + 1, width);
    const std::int64_t last = detail::floor_div(hi - 1, width);
    for (std::int64_t block = first; block <= last; ++block) {
      tile.clear();
      detail::tile_edges(params.beta, seed, scale, block, tile);
      for (const auto& e : tile) {
        const bool in_a = e.a >= lo && e.a < hi;
        const bool in_b = e.b >= lo && e.b < hi;
        if (in_a && in_b) {
          edges.push_back(e);
        } else if (in_a) {
          ++outside[static_cast<std::size_t>(e.a - lo)];
        } else if (in_b) {
          ++outside[static_cast<std::size_t>(e.b - lo)];
        }
      }
    }
  }
  return Environment::from_edges(params, seed, std::move(edges), std::move(outside));
}

void write_environment(std::ostream& out, const Environment& env) {
  char header[160];
  std::snprintf(header, sizeof header, "# beta=%.17g lo=%" PRId64 " hi=%" PRId64 " seed=%" PRIu64 "\n",
                env.beta(), env.lo(), env.hi(), env.seed());
  out << header;
  for (const auto& e : env.long_edges()) out << e.a << ' ' << e.b << '\n';
}

Environment read_environment(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("environment file is empty");
  ModelParams params;
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  std::uint64_t seed = 0;
  if (std::sscanf(line.c_str(), "# beta=%lf lo=%" SCNd64 " hi=%" SCNd64 " seed=%" SCNu64, &params.beta,
                  &lo, &hi, &seed) != 4) {
    throw ConfigError("malformed environment header: '" + line + "'");
  }
  params.window_lo = lo;
  params.window_hi = hi;
  params.validate();
  std::vector<Edge> edges;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    Edge e{};
    std::string rest;
    if (!(fields >> e.a >> e.b) || (fields >> rest)) {
      throw ConfigError("malformed edge on line " + std::to_string(line_no) + ": '" + line + "'");
    }
    edges.push_back(e);
  }
  const Environment sampled = sample_environment(params, seed);
  std::vector<int> outside(static_cast<std::size_t>(params.length()));
  for (Vertex x = lo; x < hi; ++x) outside[static_cast<std::size_t>(x - lo)] = sampled.outside_degree(x);
  return Environment::from_edges(params, seed, std::move(edges), std::move(outside));
}

}  // namespace lrp
