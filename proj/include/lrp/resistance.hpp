#ifndef LRP_RESISTANCE_HPP
#define LRP_RESISTANCE_HPP

// Electrical-network engine over sampled environments: unit conductance on
// every edge, grounded Laplacians factorised once and reused across many
// right-hand sides.

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "lrp/model.hpp"

namespace lrp {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

enum class SolverKind {
  automatic,  // direct up to kDirectSolverLimit vertices, iterative above
  direct,     // sparse LDL^T with approximate-minimum-degree ordering
  iterative,  // diagonally preconditioned conjugate gradient, tol 1e-10
};

inline constexpr std::int64_t kDirectSolverLimit = 100000;

/// Grounded graph Laplacian of the subgraph induced by a vertex set. The
/// ground vertex's potential is pinned to 0 which makes the remaining block
/// symmetric positive definite. Cheap to copy; the factorisation is shared
/// and immutable, so concurrent solves are safe.
class LinearSystem {
 public:
  /// Interval [lo, hi) of env's window; uses only edges with both endpoints
  /// inside the interval.
  static LinearSystem assemble(const Environment& env, Vertex lo, Vertex hi,
                               SolverKind solver = SolverKind::automatic);
  /// The whole window.
  static LinearSystem assemble(const Environment& env, SolverKind solver = SolverKind::automatic);
  /// Explicit vertex set. Throws DomainError naming a vertex of a component
  /// that is disconnected from the first vertex.
  static LinearSystem assemble(const Environment& env, std::vector<Vertex> vertices,
                               SolverKind solver = SolverKind::automatic);

  /// The whole window grounded at `ground`.
  static LinearSystem assemble_grounded(const Environment& env, Vertex ground,
                                        SolverKind solver = SolverKind::automatic);

  /// Same graph, grounded at `ground` instead of the highest vertex.
  LinearSystem regrounded(Vertex ground) const;

  std::int64_t size() const noexcept { return static_cast<std::int64_t>(vertices_.size()); }
  std::span<const Vertex> vertices() const noexcept { return vertices_; }
  bool contains(Vertex x) const noexcept;
  /// Position of x in vertices(); throws DomainError when absent.
  std::int64_t index_of(Vertex x) const;
  Vertex ground() const noexcept { return vertices_[static_cast<std::size_t>(ground_)]; }
  std::int64_t ground_index() const noexcept { return ground_; }
  bool is_interval() const noexcept { return contiguous_; }
  /// True when the vertex set is the environment's whole window.
  bool spans_window() const noexcept { return spans_window_; }
  SolverKind solver() const noexcept;

  /// Ungrounded Laplacian (size x size): off-diagonals -1 per edge, zero
  /// row sums.
  const SparseMatrix& laplacian() const noexcept { return laplacian_; }

  /// Solves L x = b on the complement of the ground with x(ground) = 0. The
  /// ground entry of b is ignored.
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;

  /// f^T L f, i.e. half the sum over ordered adjacent pairs of (f(x)-f(y))^2.
  double energy(const Eigen::VectorXd& f) const;

  /// Diagonal of the grounded inverse G (G(ground, ground) = 0), extracted
  /// from the LDL^T factor by selected inversion. Direct solver only.
  Eigen::VectorXd inverse_diagonal() const;
  /// Same diagonal from one solve per vertex.
  Eigen::VectorXd inverse_diagonal_by_solves() const;

  /// Fill-reducing ordering of the grounded block (empty for iterative).
  Eigen::VectorXi ordering() const;
  std::int64_t factor_nonzeros() const;

 private:
  struct Factor;
  LinearSystem() = default;
  static LinearSystem assemble_interval(const Environment& env, Vertex lo, Vertex hi, Vertex ground,
                                        SolverKind solver);
  void factorize(SolverKind solver);
  SparseMatrix grounded_block() const;
  Eigen::VectorXd scatter(const Eigen::VectorXd& reduced) const;

  std::vector<Vertex> vertices_;
  bool contiguous_ = false;
  bool spans_window_ = false;
  std::int64_t ground_ = 0;
  SparseMatrix laplacian_;
  std::shared_ptr<const Factor> factor_;
};

enum class QueryKind { two_point_restricted, two_point_windowed, point_to_set };

const char* to_string(QueryKind kind) noexcept;

struct ResistanceQuery {
  QueryKind kind = QueryKind::two_point_restricted;
  Vertex i = 0;
  Vertex j = 0;               // unused for point_to_set
  double value = 0.0;         // ohms
  bool boundary_flag = false;  // the value may differ from the Z-environment's
};

/// (e_i - e_j)^T G (e_i - e_j) from one solve. Windowed queries (system
/// spans the whole window) are flagged when an endpoint lies within
/// size/16 of a window end.
ResistanceQuery two_point(const LinearSystem& sys, Vertex i, Vertex j);

struct PointToSetOptions {
  /// Z-edges from non-target window vertices to vertices outside the window
  /// are attached to the target supernode. Exact for Z whenever the
  /// target is meant to include everything outside the window.
  bool outside_edges_to_target = false;
};

/// R(i, S) on env's window: S is collapsed to a grounded supernode (parallel
/// conductances add) and one solve gives the potential at i.
ResistanceQuery point_to_set(const Environment& env, Vertex i, std::span<const Vertex> target,
                             const PointToSetOptions& options = {});

/// CSV rows `beta,n,seed,kind,i,j,value,boundary_flag`.
void write_query_csv(std::ostream& out, double beta, std::int64_t n, std::uint64_t seed,
                     std::span<const ResistanceQuery> queries, bool header = true);

/// R(source, y) for every vertex of the system.
struct ResistanceProfile {
  Vertex source = 0;
  std::vector<Vertex> vertices;
  std::vector<double> values;

  double at(Vertex y) const;
};

ResistanceProfile resistance_profile(const LinearSystem& sys, Vertex source);

struct ResistanceBall {
  Vertex center = 0;
  double radius = 0.0;
  std::vector<Vertex> members;  // ascending
  double volume = 0.0;          // sum of Z-degrees over members
  bool touches_window_boundary = false;
  /// R(0, T) on the window's edges, T = both outer margins.
  double margin_resistance = 0.0;
  Vertex half_width = 0;
};

/// Ball {y : R(0, y) < r} computed on env's whole window, which must
/// contain 0. Flagged when a member lies within size/16 of either window
/// end, or when R(0, T) < r for T the outer margins on both sides.
ResistanceBall build_ball(const Environment& env, double r);

/// Pre-computed pieces for building several balls on one environment.
struct BallContext {
  Environment env;
  ResistanceProfile profile;
  double margin_resistance = 0.0;
};

BallContext make_ball_context(Environment env);
ResistanceBall build_ball(const BallContext& ctx, double r);

struct WindowPolicy {
  Vertex initial_half_width = 256;
  Vertex max_half_width = Vertex{1} << 16;
  /// Heat-kernel windows use half-width multiplier * N_max (capped by max).
  double multiplier = 8.0;
};

/// Samples the Z-environment for (beta, seed) on [-W, W), doubling W from
/// the policy's initial value until the ball of radius r_max is unflagged
/// or W reaches the maximum. The returned context may still be flagged.
/// Without long edges the window is the bare path.
BallContext grow_ball_context(double beta, std::uint64_t seed, double r_max,
                              const WindowPolicy& policy, bool long_edges = true);

struct PairStat {
  Vertex i = 0;
  Vertex j = 0;
  double mean = 0.0;
  double standard_error = 0.0;
};

struct LambdaOptions {
  /// Estimate only (0, n-1) and a random subsample of pairs.
  bool fast = false;
  std::int64_t pair_subsample = 64;
};

struct LambdaEstimate {
  std::int64_t n = 0;
  double beta = 0.0;
  std::int64_t replicates = 0;
  bool fast_mode = false;
  double value = 0.0;  // max over estimated pairs of the mean resistance
  double standard_error = 0.0;
  PairStat max_pair;
  /// Pairs whose mean is within one standard error of the maximum, sorted
  /// by decreasing mean.
  std::vector<PairStat> tied_pairs;
  /// Mean of R_[0,n)(0, n-1).
  PairStat endpoint_pair;
  /// Fast mode: max over the sampled pairs (including the endpoints).
  double subsample_max = 0.0;
  /// Per replicate: the pair attaining max_{i,j} R_[0,n)(i,j) (all-pairs
  /// mode only) and max_x R_[0,n)(0, x).
  std::vector<PairStat> replicate_argmax;
  std::vector<double> max_from_origin;
  /// Fraction of replicates whose argmax pair is (0, n-1).
  double endpoint_argmax_fraction = 0.0;
};

/// Lambda(n) = max_{i,j} E[R_[0,n)(i,j)]: per-pair means over independent
/// replicates, then the maximum. Throws ConfigError for replicates < 2 or
/// n > 2^13 in all-pairs mode.
LambdaEstimate lambda_hat(double beta, std::int64_t n, std::int64_t replicates, std::uint64_t seed,
                          const LambdaOptions& options = {});

}  // namespace lrp

#endif  // LRP_RESISTANCE_HPP
