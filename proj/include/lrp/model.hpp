#ifndef LRP_MODEL_HPP
#define LRP_MODEL_HPP

// Critical long-range percolation on Z: nearest-neighbour edges are always
// present, a long edge <i,j> (|i-j| = k >= 2) is present independently with
// probability 1 - (1 - k^-2)^beta.
//
// All samplers draw from one global random field indexed by (seed, scale,
// block): a window environment with a given seed is exactly the restriction
// of the Z-environment with that seed, and the lazy sampler reveals the same
// edges as the eager one.

#include <cstdint>
#include <iosfwd>
#include <mutex>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lrp {

using Vertex = std::int64_t;

struct Edge {
  Vertex a;  // a < b
  Vertex b;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct ModelParams {
  double beta = 1.0;
  Vertex window_lo = 0;
  Vertex window_hi = 2;

  Vertex length() const noexcept { return window_hi - window_lo; }
  // Throws ConfigError on beta <= 0 or window length < 2.
  void validate() const;
};

/// Connection probability for two vertices at distance k. Throws DomainError
/// for k <= 0.
double edge_probability(double beta, std::int64_t k);

/// Expected degree of a vertex on Z, mu_beta = 2 + 2 sum_{k>=2} p(k).
double mean_degree(double beta);

/// Long edges are generated up to this distance (exclusive); beyond it the
/// probability of any incident edge is below 2 * beta * 2^-32 per vertex.
inline constexpr std::int64_t kMaxEdgeLength = std::int64_t{1} << 32;

namespace detail {
// Largest scale s: tiles cover distances k in [2^s, 2^(s+1)).
inline constexpr int kMaxScale = 31;

// Appends every long edge <i, i+k> with k in [2^scale, 2^(scale+1)) and
// i in [block * 2^scale, (block+1) * 2^scale) to `out`, ordered by k then i.
// Deterministic in (beta, seed, scale, block).
void tile_edges(double beta, std::uint64_t seed, int scale, std::int64_t block,
                std::vector<Edge>& out);

std::int64_t floor_div(std::int64_t a, std::int64_t b) noexcept;
}  // namespace detail

/// One sampled environment restricted to a finite window [lo, hi).
/// Immutable after construction; safe to share between threads.
class Environment {
 public:
  Environment() = default;

  /// Builds from an explicit long-edge list. Validates that every edge has
  /// |a-b| > 1, both endpoints in the window and no duplicates. `outside`
  /// holds, per window vertex, the number of Z-edges leaving the window
  /// (including the nearest-neighbour edges at the two ends); empty means
  /// "nearest-neighbour boundary edges only".
  static Environment from_edges(const ModelParams& params, std::uint64_t seed,
                                std::vector<Edge> edges, std::vector<int> outside = {});

  /// Path graph on the window: no long edges.
  static Environment pure_path(Vertex lo, Vertex hi);

  const ModelParams& params() const noexcept { return params_; }
  double beta() const noexcept { return params_.beta; }
  std::uint64_t seed() const noexcept { return seed_; }
  Vertex lo() const noexcept { return params_.window_lo; }
  Vertex hi() const noexcept { return params_.window_hi; }
  std::int64_t size() const noexcept { return params_.length(); }
  bool contains(Vertex x) const noexcept { return x >= lo() && x < hi(); }

  /// Long edges, sorted, each stored once with a < b.
  const std::vector<Edge>& long_edges() const noexcept { return edges_; }

  /// Long neighbours of x inside the window, ascending.
  std::span<const Vertex> long_neighbors(Vertex x) const;

  bool has_long_edge(Vertex a, Vertex b) const;

  /// Degree in the window graph: in-window nearest neighbours plus stored
  /// long edges.
  int degree(Vertex x) const;
  /// Number of Z-edges at x whose other endpoint is outside the window.
  int outside_degree(Vertex x) const;
  /// Degree of x in the Z-environment.
  int full_degree(Vertex x) const { return degree(x) + outside_degree(x); }

  /// Copy of this environment with one extra long edge (and no change to
  /// outside degrees). Throws DomainError if the edge is invalid or present.
  Environment with_edge(Vertex a, Vertex b) const;

  /// Copy with every long edge removed; outside degrees keep only the
  /// nearest-neighbour boundary edges.
  Environment without_long_edges() const;

 private:
  void build_adjacency();

  ModelParams params_{};
  std::uint64_t seed_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::int64_t> offsets_;   // CSR over window index
  std::vector<Vertex> neighbors_;
  std::vector<int> outside_;
};

/// Samples the environment on params' window. Expected cost is
/// O(window length + edges).
Environment sample_environment(const ModelParams& params, std::uint64_t seed);

/// Text format: header `# beta=<f> lo=<i> hi=<i> seed=<u64>`, then one
/// `i j` line per long edge. The reader validates all invariants and
/// recomputes outside degrees from (beta, seed).
void write_environment(std::ostream& out, const Environment& env);
Environment read_environment(std::istream& in);

/// Environment on all of Z revealed on demand. Edge decisions come from the
/// same random field as sample_environment, so restricted to a window they
/// coincide with the eager sample for the same (beta, seed).
/// reveal() is internally synchronised.
class LazyEnvironment {
 public:
  LazyEnvironment(double beta, std::uint64_t seed, bool long_edges = true);

  LazyEnvironment(const LazyEnvironment&) = delete;
  LazyEnvironment& operator=(const LazyEnvironment&) = delete;

  double beta() const noexcept { return beta_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Long neighbours of x, ascending. The reference stays valid for the
  /// lifetime of this object.
  const std::vector<Vertex>& reveal(Vertex x);
  int degree(Vertex x) { return 2 + static_cast<int>(reveal(x).size()); }

  std::size_t revealed_count() const;

 private:
  double beta_;
  std::uint64_t seed_;
  bool long_edges_;
  mutable std::mutex mutex_;
  std::unordered_map<Vertex, std::vector<Vertex>> revealed_;
};

/// For block scale m^n and i in [1, m-2]: true when [i m^n, (i+1) m^n) is
/// unbridged in env, i.e. no edge joins [0, i m^n) to [(i+1) m^n, m^(n+1)).
/// Index 0 of the result corresponds to i = 1. env's window must contain
/// [0, m^(n+1)).
std::vector<bool> unbridged_blocks(const Environment& env, std::int64_t m, int n);
/// Same answer by scanning every stored edge for every block.
std::vector<bool> unbridged_blocks_bruteforce(const Environment& env, std::int64_t m, int n);

struct BridgingStats {
  std::int64_t m = 0;
  int n = 0;
  std::int64_t replicates = 0;
  std::vector<double> unbridged_frequency;  // index i-1 for i in [1, m-2]
  std::vector<double> standard_error;
};

/// Empirical unbridged frequencies on windows [0, m^(n+1)). Throws
/// ConfigError when m < 3, n < 0 or m^(n+1) exceeds 2^26.
BridgingStats bridging_statistics(double beta, std::int64_t m, int n,
                                  std::int64_t replicates, std::uint64_t seed);

}  // namespace lrp

#endif  // LRP_MODEL_HPP
