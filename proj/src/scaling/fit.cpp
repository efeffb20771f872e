#include <boost/math/distributions/students_t.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lrp/errors.hpp"
#include "lrp/scaling.hpp"

namespace lrp {

namespace {

ExponentFit fit_impl(std::span<const FitPoint> points, std::size_t min_points) {
  if (points.size() < min_points) {
    throw DomainError("power-law fit needs at least " + std::to_string(min_points) + " points, got " +
                      std::to_string(points.size()));
  }
  ExponentFit fit;
  bool all_se = true;
  for (const auto& p : points) {
    if (!(p.x > 0.0) || !(p.y > 0.0) || !std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw DomainError("power-law fit: non-positive or non-finite point (" + std::to_string(p.x) +
                        ", " + std::to_string(p.y) + ")");
    }
    fit.log_x.push_back(std::log(p.x));
    fit.log_y.push_back(std::log(p.y));
    fit.log_se.push_back(p.se / p.y);
    if (!(p.se > 0.0)) all_se = false;
  }
  fit.weighted = all_se;
  const std::size_t n = points.size();
  std::vector<double> w(n, 1.0);
  if (all_se) {
    for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / (fit.log_se[i] * fit.log_se[i]);
  }
  double sw = 0.0, mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    mx += w[i] * fit.log_x[i];
    my += w[i] * fit.log_y[i];
  }
  mx /= sw;
  my /= sw;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = fit.log_x[i] - mx;
    const double dy = fit.log_y[i] - my;
    sxx += w[i] * dx * dx;
    sxy += w[i] * dx * dy;
    syy += w[i] * dy * dy;
  }
  if (!(sxx > 0.0)) throw DomainError("power-law fit: all x values coincide");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = fit.log_y[i] - (fit.intercept + fit.slope * fit.log_x[i]);
    ssr += w[i] * r * r;
    fit.residual_max = std::max(fit.residual_max, std::abs(r));
  }
  fit.r_squared = syy > 0.0 ? std::max(0.0, 1.0 - ssr / syy) : 1.0;
  const auto dof = static_cast<double>(n) - 2.0;
  if (dof > 0) {
    fit.slope_se = std::sqrt(ssr / dof / sxx);
    const boost::math::students_t dist(dof);
    fit.half_width = boost::math::quantile(boost::math::complement(dist, 0.025)) * fit.slope_se;
  } else {
    fit.slope_se = std::numeric_limits<double>::infinity();
    fit.half_width = std::numeric_limits<double>::infinity();
  }
  return fit;
}

}  // namespace

double ExponentFit::predict(double x) const { return std::exp(intercept + slope * std::log(x)); }

ExponentFit fit_power_law(std::span<const FitPoint> points) { return fit_impl(points, 3); }

ExponentFit fit_power_law_loose(std::span<const FitPoint> points) { return fit_impl(points, 2); }

double ScalingFunctions::phi(double r) const { return volume_scale * std::pow(r, 1.0 / delta); }

double ScalingFunctions::Psi(double r) const {
  return std::pow(r / volume_scale, delta / (1.0 + delta));
}

WilsonInterval wilson_interval(std::int64_t hits, std::int64_t trials, double z) {
  if (trials <= 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(hits) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

}  // namespace lrp
