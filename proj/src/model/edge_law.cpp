#include <cmath>
#include <string>

#include "lrp/errors.hpp"
#include "lrp/model.hpp"
#include "lrp/rng.hpp"

namespace lrp {

void ModelParams::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw ConfigError("beta must be a positive finite number, got " + std::to_string(beta));
  }
  if (window_hi - window_lo < 2) {
    throw ConfigError("window [" + std::to_string(window_lo) + ", " + std::to_string(window_hi) +
                      ") must contain at least two vertices");
  }
}

// The double integral of |u-v|^-2 over [0,1] x [k,k+1] equals
// ln(k^2 / (k^2 - 1)), so exp(-beta * integral) = (1 - k^-2)^beta.
double edge_probability(double beta, std::int64_t k) {
  if (k <= 0) throw DomainError("edge_probability: distance must be >= 1, got " + std::to_string(k));
  if (k == 1) return 1.0;
  const double kd = static_cast<double>(k);
  const double inv_sq = 1.0 / (kd * kd);
  return -std::expm1(beta * std::log1p(-inv_sq));
}

namespace {

// sum_{k > K} k^-s by Euler-Maclaurin.
double power_tail(double s, double K) {
  return std::pow(K, 1.0 - s) / (s - 1.0) - std::pow(K, -s) / 2.0 +
         s * std::pow(K, -s - 1.0) / 12.0 -
         s * (s + 1.0) * (s + 2.0) * std::pow(K, -s - 3.0) / 720.0 +
         s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * std::pow(K, -s - 5.0) / 30240.0;
}

}  // namespace

double mean_degree(double beta) {
  if (!(beta > 0.0)) throw DomainError("mean_degree: beta must be positive");
  constexpr std::int64_t kCut = std::int64_t{1} << 16;
  // Kahan sum, smallest terms first.
  double sum = 0.0;
  double carry = 0.0;
  for (std::int64_t k = kCut; k >= 2; --k) {
    const double y = edge_probability(beta, k) - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  // p(k) = -sum_{m>=1} binom(beta, m) (-1)^m k^-2m for the remaining tail.
  double tail = 0.0;
  double binom = 1.0;
  for (int m = 1; m <= 5; ++m) {
    binom *= (beta - (m - 1)) / m;
    const double sign = (m % 2 == 0) ? -1.0 : 1.0;
    tail += sign * binom * power_tail(2.0 * m, static_cast<double>(kCut));
  }
  return 2.0 + 2.0 * (sum + tail);
}

namespace detail {

std::int64_t floor_div(std::int64_t a, std::int64_t b) noexcept {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Cells of tile (scale, block) are indexed c = (k - 2^scale) * 2^scale + (i - block * 2^scale).
// Candidates are Bernoulli(p(2^scale)) by geometric skipping over c and
// thinned to p(k) with a second uniform.
void tile_edges(double beta, std::uint64_t seed, int scale, std::int64_t block,
                std::vector<Edge>& out) {
  const std::int64_t width = std::int64_t{1} << scale;
  const double p_max = edge_probability(beta, width);
  if (!(p_max > 0.0)) return;
  const double log_q = std::log1p(-p_max);
  const std::uint64_t cells = static_cast<std::uint64_t>(width) * static_cast<std::uint64_t>(width);
  auto rng = CounterRng::stream(seed, {static_cast<std::uint64_t>(scale),
                                       static_cast<std::uint64_t>(block)});
  const std::uint64_t mask = static_cast<std::uint64_t>(width) - 1;
  std::uint64_t consumed = 0;
  while (consumed < cells) {
    const double skip = std::floor(std::log(rng.uniform_pos()) / log_q);
    if (!(skip < static_cast<double>(cells - consumed))) break;
    const std::uint64_t c = consumed + static_cast<std::uint64_t>(skip);
    consumed = c + 1;
    const std::int64_t k = width + static_cast<std::int64_t>(c >> scale);
    const std::int64_t i = block * width + static_cast<std::int64_t>(c & mask);
    const double u = rng.uniform();
    if (u * p_max < edge_probability(beta, k)) out.push_back(Edge{i, i + k});
  }
}

}  // namespace detail
}  // namespace lrp
