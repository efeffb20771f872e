#include <algorithm>
#include <cmath>
#include <string>

#include "lrp/errors.hpp"
#include "lrp/parallel.hpp"
#include "lrp/rng.hpp"
#include "lrp/scaling.hpp"

namespace lrp {

namespace {

void check_grid(std::span<const std::int64_t> n_grid) {
  if (n_grid.size() < 3) throw ConfigError("spectral: n grid needs at least 3 points");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1) throw ConfigError("spectral: n values must be >= 1");
    if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw ConfigError("spectral: n grid must be increasing");
  }
}

}  // namespace

Vertex spectral_half_width(std::int64_t n_max, const SpectralOptions& options) {
  const auto w = static_cast<Vertex>(std::ceil(options.multiplier * static_cast<double>(n_max)));
  return std::clamp<Vertex>(w, 16, options.max_half_width);
}

TraceBackend window_trace_backend(double beta, std::uint64_t seed, const SpectralOptions& options) {
  return [beta, seed, options](std::int64_t env_index, std::int64_t n_max) {
    const Vertex w = spectral_half_width(n_max, options);
    const std::uint64_t env_seed = derive_key(seed, {static_cast<std::uint64_t>(env_index)});
    const Environment env = options.long_edges ? sample_environment({beta, -w, w}, env_seed)
                                               : Environment::pure_path(-w, w);
    return evolve_heat_kernel(env, 0, n_max, {.leak_tolerance = options.leak_tolerance});
  };
}

SpectralResult spectral_dimension_annealed(double beta, std::span<const std::int64_t> n_grid,
                                           std::int64_t environments, std::uint64_t seed,
                                           const SpectralOptions& options, const TraceBackend& backend) {
  check_grid(n_grid);
  if (environments < 2) throw ConfigError("spectral: need at least 2 environments");
  const std::int64_t n_max = 2 * n_grid.back();
  const TraceBackend run = backend ? backend : window_trace_backend(beta, seed, options);

  // Only the grid values are kept per environment.
  struct Kept {
    std::vector<double> p;
    double leak = 0.0;
    bool valid = true;
  };
  const auto kept = parallel_map(environments, [&](std::int64_t e) {
    const HeatKernelTrace t = run(e, n_max);
    if (t.steps() < n_max) throw InvariantViolation("spectral: backend returned a short trace");
    Kept k;
    for (auto n : n_grid) k.p.push_back(t.p[static_cast<std::size_t>(2 * n)]);
    k.leak = t.total_leak();
    k.valid = t.valid;
    return k;
  });

  SpectralResult res;
  res.beta = beta;
  res.environments = environments;
  std::vector<double> sum(n_grid.size(), 0.0), sumsq(n_grid.size(), 0.0);
  std::int64_t used = 0;
  for (const auto& k : kept) {
    res.mean_leak += k.leak;
    res.max_leak = std::max(res.max_leak, k.leak);
    if (!k.valid) {
      ++res.discarded;
      continue;
    }
    ++used;
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
      sum[i] += k.p[i];
      sumsq[i] += k.p[i] * k.p[i];
    }
  }
  res.mean_leak /= static_cast<double>(environments);
  res.discard_rate = static_cast<double>(res.discarded) / static_cast<double>(environments);
  res.valid = res.discard_rate <= options.max_discard_rate && used >= 2;
  if (used < 2) return res;
  std::vector<FitPoint> points;
  const double u = static_cast<double>(used);
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    const double mean = sum[i] / u;
    const double var = std::max(0.0, (sumsq[i] - u * mean * mean) / (u - 1.0));
    res.n.push_back(n_grid[i]);
    res.mean_p2n.push_back(mean);
    res.se.push_back(std::sqrt(var / u));
    points.push_back({static_cast<double>(n_grid[i]), mean, res.se.back()});
  }
  res.fit = fit_power_law(points);
  res.d_s = -2.0 * res.fit.slope;
  return res;
}

SpectralResult spectral_dimension_quenched(const HeatKernelTrace& trace,
                                           std::span<const std::int64_t> n_grid,
                                           const SpectralOptions& options) {
  check_grid(n_grid);
  if (trace.steps() < 2 * n_grid.back()) throw DomainError("spectral: trace is shorter than 2 max(n)");
  SpectralResult res;
  res.beta = trace.beta;
  res.environments = 1;
  res.mean_leak = res.max_leak = trace.total_leak();
  res.discarded = trace.total_leak() <= options.leak_tolerance ? 0 : 1;
  res.discard_rate = static_cast<double>(res.discarded);
  res.valid = res.discarded == 0;
  std::vector<FitPoint> points;
  for (auto n : n_grid) {
    const double p = trace.p[static_cast<std::size_t>(2 * n)];
    res.n.push_back(n);
    res.mean_p2n.push_back(p);
    res.se.push_back(0.0);
    points.push_back({static_cast<double>(n), p, 0.0});
  }
  res.fit = fit_power_law(points);
  res.d_s = -2.0 * res.fit.slope;
  return res;
}

SpectralResult spectral_dimension_quenched(const Environment& env, std::span<const std::int64_t> n_grid,
                                           const SpectralOptions& options) {
  check_grid(n_grid);
  const HeatKernelTrace trace =
      evolve_heat_kernel(env, 0, 2 * n_grid.back(), {.leak_tolerance = options.leak_tolerance});
  return spectral_dimension_quenched(trace, n_grid, options);
}

}  // namespace lrp
