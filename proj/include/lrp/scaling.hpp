#ifndef LRP_SCALING_HPP
#define LRP_SCALING_HPP

// Statistics over the resistance and walk engines: weighted power-law fits,
// the exponents delta and d_s, tail curves of ball volumes and resistances,
// good-radius frequencies and the dyadic chaining check.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lrp/model.hpp"
#include "lrp/resistance.hpp"
#include "lrp/walk.hpp"

namespace lrp {

struct FitPoint {
  double x = 0.0;
  double y = 0.0;
  double se = 0.0;  // standard error of y; 0 everywhere means unweighted
};

struct ExponentFit {
  std::vector<double> log_x;
  std::vector<double> log_y;
  std::vector<double> log_se;  // se / y
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double half_width = 0.0;  // 95% Student-t half-width of the slope
  double r_squared = 1.0;
  double residual_max = 0.0;
  bool weighted = false;

  double predict(double x) const;
};

/// Weighted least squares of log y on log x with weights 1/(se/y)^2
/// (uniform when any se is 0). Needs >= 3 points; throws DomainError for a
/// non-positive coordinate.
ExponentFit fit_power_law(std::span<const FitPoint> points);
/// Two points are accepted here (half_width is then infinite).
ExponentFit fit_power_law_loose(std::span<const FitPoint> points);

/// phi(r) = c r^(1/delta), psi(r) = r, Psi = inverse of phi * psi. The
/// volume scale c is 1 unless calibrated.
struct ScalingFunctions {
  double delta = 0.5;
  double volume_scale = 1.0;

  double phi(double r) const;
  double psi(double r) const { return r; }
  double Psi(double r) const;
  double phi_of_Psi(double r) const { return phi(Psi(r)); }
  /// Expected exit-time exponent (1 + delta) / delta.
  double exit_exponent() const { return (1.0 + delta) / delta; }
  double spectral_exponent() const { return 1.0 / (1.0 + delta); }
};

using LambdaBackend =
    std::function<LambdaEstimate(double beta, std::int64_t n, std::int64_t replicates, std::uint64_t seed)>;

struct DeltaEstimate {
  double beta = 0.0;
  ScalingFunctions scaling;
  ExponentFit fit;
  std::vector<LambdaEstimate> lambdas;
};

/// Lambda-hat per n (seeds derived from (seed, n, replicate) inside
/// lambda_hat), then delta-hat = slope of log Lambda-hat vs log n. The grid
/// must be powers of two with at least three points.
DeltaEstimate estimate_delta(double beta, std::span<const std::int64_t> n_grid,
                             std::int64_t replicates, std::uint64_t seed,
                             const LambdaBackend& backend = {});

struct MomentDiagnostic {
  int order = 1;
  std::vector<std::int64_t> n;
  std::vector<double> ratio;  // E[max_x R(0,x)^order] / Lambda-hat^order
  ExponentFit fit;
};

/// Ratios from the max_from_origin samples stored in each estimate.
MomentDiagnostic moment_diagnostic(std::span<const LambdaEstimate> lambdas, int order);

struct SpectralOptions {
  /// Window half-width = multiplier * n_max (steps), capped at max_half_width.
  double multiplier = 8.0;
  Vertex max_half_width = Vertex{1} << 20;
  double leak_tolerance = 0.25;
  double max_discard_rate = 0.05;
  bool long_edges = true;
};

/// env_index -> trace of at least n_max steps from 0.
using TraceBackend = std::function<HeatKernelTrace(std::int64_t env_index, std::int64_t n_max)>;

struct SpectralResult {
  double beta = 0.0;
  std::vector<std::int64_t> n;  // fit abscissa; the return time is 2n
  std::vector<double> mean_p2n;
  std::vector<double> se;
  ExponentFit fit;
  double d_s = 0.0;  // -2 * slope
  std::int64_t environments = 0;
  std::int64_t discarded = 0;
  double discard_rate = 0.0;
  double mean_leak = 0.0;
  double max_leak = 0.0;
  bool valid = true;
};

/// Window half-width used for walks of n_max steps.
Vertex spectral_half_width(std::int64_t n_max, const SpectralOptions& options);

/// Default backend: environment derive_key(seed, {env_index}) on
/// [-W, W) (or the bare path when long edges are off), evolved from 0.
TraceBackend window_trace_backend(double beta, std::uint64_t seed, const SpectralOptions& options);

/// E[p_2n(0,0)] over environments, slope of its log against log n.
SpectralResult spectral_dimension_annealed(double beta, std::span<const std::int64_t> n_grid,
                                           std::int64_t environments, std::uint64_t seed,
                                           const SpectralOptions& options = {},
                                           const TraceBackend& backend = {});
/// One frozen environment: fit of p_2n(0,0) from its trace.
SpectralResult spectral_dimension_quenched(const HeatKernelTrace& trace,
                                           std::span<const std::int64_t> n_grid,
                                           const SpectralOptions& options = {});
SpectralResult spectral_dimension_quenched(const Environment& env, std::span<const std::int64_t> n_grid,
                                           const SpectralOptions& options = {});

/// One replicate's balls: exit time per radius, nullopt when flagged.
using ExitBackend =
    std::function<std::vector<std::optional<double>>(std::int64_t replicate, std::span<const double> radii)>;

struct ExitScalingOptions {
  WindowPolicy window{};
  bool long_edges = true;
  double max_discard_rate = 0.05;
};

struct ExitScaling {
  double beta = 0.0;
  std::vector<double> r;
  std::vector<double> mean;
  std::vector<double> se;
  std::vector<std::int64_t> used;
  std::vector<std::int64_t> discarded;
  ExponentFit fit;
  double max_discard_rate = 0.0;
  bool valid = true;
};

ExitBackend ball_exit_backend(double beta, std::uint64_t seed, const ExitScalingOptions& options);

/// Mean exact E_0[tau_r] per radius over replicates, fitted against r.
ExitScaling exit_time_exponent(double beta, std::span<const double> r_grid, std::int64_t replicates,
                               std::uint64_t seed, const ExitScalingOptions& options = {},
                               const ExitBackend& backend = {});

/// V_r(0) and R(0, B_r(0)^c) for one environment.
struct BallSample {
  double volume = 0.0;
  double resistance_to_complement = 0.0;
  bool flagged = false;
  Vertex half_width = 0;
};

/// Replicate k uses environment derive_key(seed, {k}) with the window grown
/// until the radius-r ball is unflagged.
std::vector<BallSample> sample_balls(double beta, double r, std::int64_t replicates, std::uint64_t seed,
                                     const WindowPolicy& policy = {});

enum class TailTag { volume_low, volume_high, resistance_low, good_radius };

const char* to_string(TailTag tag) noexcept;
std::optional<TailTag> parse_tail_tag(const std::string& text);

struct TailCurve {
  TailTag tag = TailTag::volume_low;
  double r = 0.0;
  std::vector<double> lambda;
  std::vector<std::int64_t> hits;
  std::vector<std::int64_t> complement_hits;  // samples where the event fails
  std::vector<double> probability;
  std::vector<double> wilson_lo;
  std::vector<double> wilson_hi;
  std::int64_t replicates = 0;
  std::int64_t used = 0;
  std::int64_t discarded = 0;
  ExponentFit fit;  // over points with positive probability
  std::size_t positive_points = 0;
  double slope = 0.0;  // -inf when fewer than two positive points

  /// No later point's interval lies entirely above an earlier point's.
  bool monotone_within_ci() const;
};

/// Event per tag at threshold lambda:
///   volume_low      V <= phi(r) / lambda
///   volume_high     V >= lambda phi(r)
///   resistance_low  R(0, B^c) <= psi(r) / lambda
///   good_radius     r is NOT in J(lambda) (so the curve is 1 - P[r in J])
TailCurve tail_curve(TailTag tag, std::span<const BallSample> samples, double r,
                     std::span<const double> lambda_grid, const ScalingFunctions& scaling);
TailCurve tail_curve(TailTag tag, double beta, double r, std::span<const double> lambda_grid,
                     std::int64_t replicates, const ScalingFunctions& scaling, std::uint64_t seed);

/// P[r in J(lambda)] over unflagged samples: phi(r)/lambda <= V <= lambda phi(r)
/// and R(0, B^c) >= psi(r)/lambda.
struct GoodRadius {
  double lambda = 0.0;
  double frequency = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
  std::int64_t used = 0;
  std::int64_t discarded = 0;
};

GoodRadius good_radius_frequency(std::span<const BallSample> samples, double r, double lambda,
                                 const ScalingFunctions& scaling);
GoodRadius good_radius_frequency(double beta, double r, double lambda, std::int64_t replicates,
                                 const ScalingFunctions& scaling, std::uint64_t seed);

/// c such that phi(r) = c r^(1/delta) is the median volume of the samples.
double calibrate_volume_scale(std::span<const BallSample> samples, double r, double delta);

/// E[1/V_r(0)] r^(1/delta) per radius, fitted against r.
struct InverseVolumeDiagnostic {
  std::vector<double> r;
  std::vector<double> scaled_mean;
  ExponentFit fit;
};

InverseVolumeDiagnostic inverse_volume_diagnostic(std::span<const double> radii,
                                                  std::span<const std::vector<BallSample>> samples,
                                                  double delta);

struct WilsonInterval {
  double lo = 0.0;
  double hi = 1.0;
};

WilsonInterval wilson_interval(std::int64_t hits, std::int64_t trials, double z = 1.959963984540054);

struct ChainReport {
  std::int64_t n = 0;
  Vertex x = 0;
  int m = 0;
  std::vector<Vertex> sequence;  // x_0 = x, ..., x_m = 0
  bool lattice_property = true;  // x_l in 2^l Z and in [0, n)
  bool step_property = true;     // x_l - x_{l+1} in {0, 2^l}
  double resistance = 0.0;       // R_[0,n)(0, x)
  double chain_sum = 0.0;        // sum over steps of R on [x_{l+1}, x_l]
  double bound = 0.0;            // sum_l max_y R on [y - 2^l, y]
  double slack = 0.0;            // bound - resistance
};

/// Builds the dyadic sequence for x in [0, n) and evaluates both sides of
/// the chaining inequality on env (window must contain [0, n)). Throws
/// InvariantViolation when the construction breaks either property.
ChainReport dyadic_chain_check(const Environment& env, std::int64_t n, Vertex x);

/// The dyadic sequence alone.
std::vector<Vertex> dyadic_sequence(Vertex x, int m);

}  // namespace lrp

#endif  // LRP_SCALING_HPP
