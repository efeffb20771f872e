#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lrp/errors.hpp"
#include "lrp/parallel.hpp"
#include "lrp/rng.hpp"
#include "lrp/scaling.hpp"

namespace lrp {

namespace {

// Large radii need wide windows; growth stops as soon as the ball is clear.
constexpr WindowPolicy kTailPolicy{.initial_half_width = 256, .max_half_width = Vertex{1} << 22};

bool in_good_set(const BallSample& s, double r, double lambda, const ScalingFunctions& scaling) {
  const double phi = scaling.phi(r);
  return s.volume >= phi / lambda && s.volume <= lambda * phi &&
         s.resistance_to_complement >= scaling.psi(r) / lambda;
}

bool event(TailTag tag, const BallSample& s, double r, double lambda, const ScalingFunctions& scaling) {
  switch (tag) {
    case TailTag::volume_low: return s.volume <= scaling.phi(r) / lambda;
    case TailTag::volume_high: return s.volume >= lambda * scaling.phi(r);
    case TailTag::resistance_low: return s.resistance_to_complement <= scaling.psi(r) / lambda;
    case TailTag::good_radius: return !in_good_set(s, r, lambda, scaling);
  }
  return false;
}

void check_lambda(double lambda) {
  if (!(lambda >= 1.0) || !std::isfinite(lambda)) {
    throw ConfigError("lambda must be finite and >= 1, got " + std::to_string(lambda));
  }
}

}  // namespace

const char* to_string(TailTag tag) noexcept {
  switch (tag) {
    case TailTag::volume_low: return "V-low";
    case TailTag::volume_high: return "V-high";
    case TailTag::resistance_low: return "R-low";
    case TailTag::good_radius: return "J";
  }
  return "?";
}

std::optional<TailTag> parse_tail_tag(const std::string& text) {
  for (auto tag : {TailTag::volume_low, TailTag::volume_high, TailTag::resistance_low, TailTag::good_radius}) {
    if (text == to_string(tag)) return tag;
  }
  return std::nullopt;
}

std::vector<BallSample> sample_balls(double beta, double r, std::int64_t replicates, std::uint64_t seed,
                                     const WindowPolicy& policy) {
  if (!(r > 0.0)) throw ConfigError("ball radius must be positive");
  if (replicates < 1) throw ConfigError("need at least one replicate");
  return parallel_map(replicates, [&](std::int64_t k) {
    const BallContext ctx = grow_ball_context(beta, derive_key(seed, {static_cast<std::uint64_t>(k)}), r, policy);
    const ResistanceBall ball = build_ball(ctx, r);
    BallSample s;
    s.volume = ball.volume;
    s.flagged = ball.touches_window_boundary;
    s.half_width = ball.half_width;
    // Complement = rest of the window plus everything beyond it.
    std::vector<Vertex> rest;
    rest.reserve(static_cast<std::size_t>(ctx.env.size()) - ball.members.size());
    auto it = ball.members.begin();
    for (Vertex y = ctx.env.lo(); y < ctx.env.hi(); ++y) {
      if (it != ball.members.end() && *it == y) {
        ++it;
        continue;
      }
      rest.push_back(y);
    }
    s.resistance_to_complement = point_to_set(ctx.env, 0, rest, {.outside_edges_to_target = true}).value;
    return s;
  });
}

bool TailCurve::monotone_within_ci() const {
  for (std::size_t j = 1; j < lambda.size(); ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      if (wilson_lo[j] > wilson_hi[i]) return false;
    }
  }
  return true;
}

TailCurve tail_curve(TailTag tag, std::span<const BallSample> samples, double r,
                     std::span<const double> lambda_grid, const ScalingFunctions& scaling) {
  if (lambda_grid.empty()) throw ConfigError("tail curve: empty lambda grid");
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    check_lambda(lambda_grid[i]);
    if (i > 0 && lambda_grid[i] <= lambda_grid[i - 1]) throw ConfigError("tail curve: lambda grid must increase");
  }
  TailCurve c;
  c.tag = tag;
  c.r = r;
  c.replicates = static_cast<std::int64_t>(samples.size());
  for (const auto& s : samples) (s.flagged ? c.discarded : c.used) += 1;
  std::vector<FitPoint> positive;
  for (double lambda : lambda_grid) {
    std::int64_t hits = 0;
    for (const auto& s : samples) {
      if (!s.flagged && event(tag, s, r, lambda, scaling)) ++hits;
    }
    const double p = c.used > 0 ? static_cast<double>(hits) / static_cast<double>(c.used) : 0.0;
    const auto ci = wilson_interval(hits, c.used);
    c.lambda.push_back(lambda);
    c.hits.push_back(hits);
    c.complement_hits.push_back(c.used - hits);
    c.probability.push_back(p);
    c.wilson_lo.push_back(ci.lo);
    c.wilson_hi.push_back(ci.hi);
    if (hits > 0) positive.push_back({lambda, p, 0.0});
  }
  c.positive_points = positive.size();
  if (positive.size() >= 2 && positive.front().x < positive.back().x) {
    c.fit = fit_power_law_loose(positive);
    c.slope = c.fit.slope;
  } else {
    c.slope = -std::numeric_limits<double>::infinity();
  }
  return c;
}

TailCurve tail_curve(TailTag tag, double beta, double r, std::span<const double> lambda_grid,
                     std::int64_t replicates, const ScalingFunctions& scaling, std::uint64_t seed) {
  const auto samples = sample_balls(beta, r, replicates, seed, kTailPolicy);
  return tail_curve(tag, samples, r, lambda_grid, scaling);
}

GoodRadius good_radius_frequency(std::span<const BallSample> samples, double r, double lambda,
                                 const ScalingFunctions& scaling) {
  check_lambda(lambda);
  GoodRadius g;
  g.lambda = lambda;
  std::int64_t hits = 0;
  for (const auto& s : samples) {
    if (s.flagged) {
      ++g.discarded;
      continue;
    }
    ++g.used;
    if (in_good_set(s, r, lambda, scaling)) ++hits;
  }
  g.frequency = g.used > 0 ? static_cast<double>(hits) / static_cast<double>(g.used) : 0.0;
  const auto ci = wilson_interval(hits, g.used);
  g.wilson_lo = ci.lo;
  g.wilson_hi = ci.hi;
  return g;
}

GoodRadius good_radius_frequency(double beta, double r, double lambda, std::int64_t replicates,
                                 const ScalingFunctions& scaling, std::uint64_t seed) {
  const auto samples = sample_balls(beta, r, replicates, seed, kTailPolicy);
  return good_radius_frequency(samples, r, lambda, scaling);
}

double calibrate_volume_scale(std::span<const BallSample> samples, double r, double delta) {
  std::vector<double> v;
  for (const auto& s : samples) {
    if (!s.flagged) v.push_back(s.volume / std::pow(r, 1.0 / delta));
  }
  if (v.empty()) throw DomainError("volume calibration: every sample is flagged");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

InverseVolumeDiagnostic inverse_volume_diagnostic(std::span<const double> radii,
                                                  std::span<const std::vector<BallSample>> samples,
                                                  double delta) {
  if (radii.size() != samples.size()) throw DomainError("inverse volume: radii and samples differ in length");
  InverseVolumeDiagnostic d;
  std::vector<FitPoint> points;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    double sum = 0.0;
    std::int64_t used = 0;
    for (const auto& s : samples[i]) {
      if (s.flagged || !(s.volume > 0.0)) continue;
      sum += 1.0 / s.volume;
      ++used;
    }
    if (used == 0) continue;
    const double scaled = sum / static_cast<double>(used) * std::pow(radii[i], 1.0 / delta);
    d.r.push_back(radii[i]);
    d.scaled_mean.push_back(scaled);
    points.push_back({radii[i], scaled, 0.0});
  }
  if (points.size() >= 3) {
    d.fit = fit_power_law(points);
  } else if (points.size() == 2) {
    d.fit = fit_power_law_loose(points);
  }
  return d;
}

}  // namespace lrp
