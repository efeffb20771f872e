#ifndef LRP_WALK_HPP
#define LRP_WALK_HPP

// Simple random walk on an environment: exact evolution of the probability
// vector, Monte Carlo walkers on lazily revealed environments, and expected
// exit times from resistance balls.
//
// Transition probabilities always use Z-degrees (Environment::full_degree),
// so a window evolution is the Z walk killed when it takes an edge that
// leaves the window; that killed mass is the leak.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "lrp/model.hpp"
#include "lrp/resistance.hpp"

namespace lrp {

struct HeatKernelOptions {
  /// Largest cumulative leak for which the trace counts as valid. Some leak
  /// is unavoidable on a finite window of an infinite-range model.
  double leak_tolerance = 0.25;
  /// Keep v_n / deg for every window vertex at the final step.
  bool keep_final_row = false;
};

struct HeatKernelTrace {
  double beta = 0.0;
  std::uint64_t seed = 0;
  Vertex window_lo = 0;
  Vertex window_hi = 0;
  Vertex source = 0;
  int source_degree = 0;
  /// p_n(source, source) for n = 0..n_max.
  std::vector<double> p;
  /// Cumulative mass killed by window-leaving edges after n steps.
  std::vector<double> leak;
  /// Mass on vertices whose parity differs from source + n.
  std::vector<double> off_parity;
  /// max over steps of |total mass - (1 - leak)|.
  double mass_error = 0.0;
  bool valid = true;
  /// p_{n_max}(source, y) for y in the window (only if requested).
  std::vector<double> final_row;

  std::int64_t steps() const noexcept { return static_cast<std::int64_t>(p.size()) - 1; }
  double total_leak() const noexcept { return leak.empty() ? 0.0 : leak.back(); }
};

HeatKernelTrace evolve_heat_kernel(const Environment& env, Vertex source, std::int64_t n_max,
                                   const HeatKernelOptions& options = {});

/// Dense oracle: row `source` of P^n divided by deg, with the same killed
/// transition matrix. Windows up to a few hundred vertices.
std::vector<double> dense_heat_kernel_row(const Environment& env, Vertex source, std::int64_t n);

/// CSV rows `beta,seed,W,n,p_nn,leak` (W = half the window length).
void write_trace_csv(std::ostream& out, const std::vector<HeatKernelTrace>& traces, bool header = true);

struct WalkOptions {
  std::int64_t steps = 0;
  std::int64_t walkers = 0;
  /// Times at which statistics are recorded; each must be in [0, steps].
  std::vector<std::int64_t> record_times;
  std::uint64_t seed = 0;
};

struct WalkRecord {
  std::int64_t time = 0;
  double return_frequency = 0.0;  // fraction of walkers at 0
  double return_se = 0.0;
  double mean_x = 0.0;
  double mean_x2 = 0.0;
  double se_x2 = 0.0;
  double mean_abs_x = 0.0;
  double mean_max_abs = 0.0;  // E[max_{k<=t} |X_k|]
  double mean_range = 0.0;    // E[#W_t]
  double mean_degree_sum = 0.0;  // E[S_t]
  /// Walkers (of a windowed walk) that took an edge leaving the window.
  double escaped_fraction = 0.0;
};

struct WalkStats {
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::int64_t steps = 0;
  std::int64_t walkers = 0;
  std::vector<WalkRecord> records;
};

/// Annealed: walker w runs on its own LazyEnvironment(beta, derive_key(env_seed, {w})).
WalkStats mc_walk_annealed(double beta, std::uint64_t env_seed, const WalkOptions& options,
                           bool long_edges = true);
/// Quenched: every walker shares `env` (reveals are synchronised).
WalkStats mc_walk_quenched(LazyEnvironment& env, const WalkOptions& options);
/// Walkers on a frozen window environment with Z-degrees; a walker taking
/// a window-leaving edge is killed (counted as escaped, never at 0 again).
WalkStats mc_walk_window(const Environment& env, const WalkOptions& options);

/// CSV rows `beta,seed,n,walkers,return_freq,mean_absX,range,degree_sum`.
void write_walk_csv(std::ostream& out, const WalkStats& stats, bool header = true);

struct ExitTimeResult {
  double radius = 0.0;
  std::int64_t ball_size = 0;
  double volume = 0.0;
  double expected = 0.0;  // E_0[tau_r]
  std::int64_t mc_walkers = 0;
  double mc_mean = 0.0;
  double mc_se = 0.0;
};

/// Solves deg(x) u(x) - sum_{y~x, y in B} u(y) = deg(x) on the ball and
/// returns u(0). Throws DomainError for a boundary-flagged ball.
ExitTimeResult expected_exit_time(const Environment& env, const ResistanceBall& ball);
/// Same plus a Monte Carlo estimate from `walkers` walks.
ExitTimeResult expected_exit_time(const Environment& env, const ResistanceBall& ball,
                                  std::int64_t walkers, std::uint64_t seed);

}  // namespace lrp

#endif  // LRP_WALK_HPP
