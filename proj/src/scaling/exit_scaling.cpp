#include <algorithm>
#include <cmath>
#include <string>

#include "lrp/errors.hpp"
#include "lrp/parallel.hpp"
#include "lrp/rng.hpp"
#include "lrp/scaling.hpp"

namespace lrp {

ExitBackend ball_exit_backend(double beta, std::uint64_t seed, const ExitScalingOptions& options) {
  return [beta, seed, options](std::int64_t replicate, std::span<const double> radii) {
    const double r_max = *std::max_element(radii.begin(), radii.end());
    const BallContext ctx = grow_ball_context(beta, derive_key(seed, {static_cast<std::uint64_t>(replicate)}),
                                              r_max, options.window, options.long_edges);
    std::vector<std::optional<double>> out;
    for (double r : radii) {
      const ResistanceBall ball = build_ball(ctx, r);
      if (ball.touches_window_boundary) {
        out.emplace_back();
      } else {
        out.emplace_back(expected_exit_time(ctx.env, ball).expected);
      }
    }
    return out;
  };
}

ExitScaling exit_time_exponent(double beta, std::span<const double> r_grid, std::int64_t replicates,
                               std::uint64_t seed, const ExitScalingOptions& options,
                               const ExitBackend& backend) {
  if (r_grid.size() < 3) throw ConfigError("exit: r grid needs at least 3 radii");
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    if (!(r_grid[i] > 0.0)) throw ConfigError("exit: radii must be positive");
    if (i > 0 && r_grid[i] <= r_grid[i - 1]) throw ConfigError("exit: r grid must be increasing");
  }
  if (replicates < 2) throw ConfigError("exit: need at least 2 replicates");
  const ExitBackend run = backend ? backend : ball_exit_backend(beta, seed, options);
  const auto results = parallel_map(replicates, [&](std::int64_t k) { return run(k, r_grid); });

  ExitScaling res;
  res.beta = beta;
  std::vector<FitPoint> points;
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    double sum = 0.0, sumsq = 0.0;
    std::int64_t used = 0;
    for (const auto& rep : results) {
      if (!rep[i]) continue;
      ++used;
      sum += *rep[i];
      sumsq += *rep[i] * *rep[i];
    }
    const std::int64_t discarded = replicates - used;
    res.r.push_back(r_grid[i]);
    res.used.push_back(used);
    res.discarded.push_back(discarded);
    res.max_discard_rate =
        std::max(res.max_discard_rate, static_cast<double>(discarded) / static_cast<double>(replicates));
    if (used >= 2) {
      const double u = static_cast<double>(used);
      const double mean = sum / u;
      const double var = std::max(0.0, (sumsq - u * mean * mean) / (u - 1.0));
      res.mean.push_back(mean);
      res.se.push_back(std::sqrt(var / u));
      points.push_back({r_grid[i], mean, res.se.back()});
    } else {
      res.mean.push_back(std::nan(""));
      res.se.push_back(std::nan(""));
    }
  }
  res.valid = res.max_discard_rate <= options.max_discard_rate && points.size() == r_grid.size();
  if (points.size() >= 3) res.fit = fit_power_law(points);
  return res;
}

}  // namespace lrp
