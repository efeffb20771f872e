#include <cmath>
#include <string>

#include "lrp/errors.hpp"
#include "lrp/scaling.hpp"

namespace lrp {

DeltaEstimate estimate_delta(double beta, std::span<const std::int64_t> n_grid,
                             std::int64_t replicates, std::uint64_t seed, const LambdaBackend& backend) {
  if (n_grid.size() < 3) throw ConfigError("delta: n grid needs at least 3 points");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    const auto n = n_grid[i];
    if (n < 2 || (n & (n - 1)) != 0) {
      throw ConfigError("delta: n grid must hold powers of two >= 2, got " + std::to_string(n));
    }
    if (i > 0 && n <= n_grid[i - 1]) throw ConfigError("delta: n grid must be increasing");
  }
  DeltaEstimate out;
  out.beta = beta;
  std::vector<FitPoint> points;
  for (const auto n : n_grid) {
    LambdaEstimate est = backend ? backend(beta, n, replicates, seed) : lambda_hat(beta, n, replicates, seed);
    points.push_back({static_cast<double>(n), est.value, est.standard_error});
    out.lambdas.push_back(std::move(est));
  }
  out.fit = fit_power_law(points);
  if (!(out.fit.slope > 0.0)) {
    throw NumericValidityError("delta: fitted exponent " + std::to_string(out.fit.slope) +
                               " is not positive");
  }
  out.scaling.delta = out.fit.slope;
  return out;
}

MomentDiagnostic moment_diagnostic(std::span<const LambdaEstimate> lambdas, int order) {
  MomentDiagnostic d;
  d.order = order;
  std::vector<FitPoint> points;
  for (const auto& est : lambdas) {
    if (est.max_from_origin.empty() || !(est.value > 0.0)) continue;
    double m = 0.0;
    for (double v : est.max_from_origin) m += std::pow(v, order);
    m /= static_cast<double>(est.max_from_origin.size());
    const double ratio = m / std::pow(est.value, order);
    d.n.push_back(est.n);
    d.ratio.push_back(ratio);
    points.push_back({static_cast<double>(est.n), ratio, 0.0});
  }
  d.fit = points.size() >= 3 ? fit_power_law(points) : fit_power_law_loose(points);
  return d;
}

}  // namespace lrp
