#include <algorithm>
#include <cmath>
#include <string>

#include "lrp/errors.hpp"
#include "lrp/parallel.hpp"
#include "lrp/resistance.hpp"
#include "lrp/rng.hpp"

namespace lrp {

namespace {

constexpr std::int64_t kAllPairsLimit = std::int64_t{1} << 13;
constexpr std::uint64_t kPairTag = 0x7061697273ULL;

struct Sums {
  std::vector<double> sum;
  std::vector<double> sumsq;
  std::vector<PairStat> argmax;
  std::vector<double> origin_max;
};

struct Replicate {
  std::vector<double> values;  // one per tracked pair
  PairStat argmax;             // value stored in mean
  double origin_max = 0.0;
};

std::uint64_t replicate_seed(std::uint64_t seed, std::int64_t n, std::int64_t r) {
  return derive_key(seed, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r)});
}

// Upper-triangle pair index for i < j.
std::size_t pair_index(std::int64_t n, std::int64_t i, std::int64_t j) {
  return static_cast<std::size_t>(i * n - i * (i + 1) / 2 + (j - i - 1));
}

Replicate all_pairs(const Environment& env) {
  const std::int64_t n = env.size();
  const LinearSystem sys = LinearSystem::assemble(env, SolverKind::direct);
  const Eigen::MatrixXd g = sys.solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(n, n)));
  Replicate rep;
  rep.values.resize(static_cast<std::size_t>(n * (n - 1) / 2));
  rep.argmax.mean = -1.0;
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = i + 1; j < n; ++j) {
      const double r = std::max(0.0, g(i, i) + g(j, j) - 2.0 * g(i, j));
      rep.values[pair_index(n, i, j)] = r;
      if (r > rep.argmax.mean) rep.argmax = {i, j, r, 0.0};
      if (i == 0) rep.origin_max = std::max(rep.origin_max, r);
    }
  }
  return rep;
}

Replicate sampled_pairs(const Environment& env, const std::vector<std::pair<Vertex, Vertex>>& pairs) {
  const LinearSystem sys = LinearSystem::assemble(env, SolverKind::direct);
  const ResistanceProfile profile = resistance_profile(sys, 0);
  Replicate rep;
  rep.origin_max = *std::max_element(profile.values.begin(), profile.values.end());
  rep.argmax.mean = -1.0;
  for (const auto& [i, j] : pairs) {
    const double r = i == 0 ? profile.at(j) : two_point(sys, i, j).value;
    rep.values.push_back(r);
    if (r > rep.argmax.mean) rep.argmax = {i, j, r, 0.0};
  }
  return rep;
}

}  // namespace

LambdaEstimate lambda_hat(double beta, std::int64_t n, std::int64_t replicates, std::uint64_t seed,
                          const LambdaOptions& options) {
  if (replicates < 2) {
    throw ConfigError("lambda: replicates must be >= 2 for a standard error, got " +
                      std::to_string(replicates));
  }
  if (n < 1) throw ConfigError("lambda: n must be >= 1, got " + std::to_string(n));
  if (!options.fast && n > kAllPairsLimit) {
    throw ConfigError("lambda: all-pairs mode supports n <= 8192, got " + std::to_string(n) +
                      " (use fast mode)");
  }
  ModelParams{beta, 0, 2}.validate();

  LambdaEstimate est;
  est.n = n;
  est.beta = beta;
  est.replicates = replicates;
  est.fast_mode = options.fast;
  if (n == 1) {
    est.endpoint_pair = est.max_pair = {0, 0, 0.0, 0.0};
    est.tied_pairs = {est.max_pair};
    est.endpoint_argmax_fraction = 1.0;
    est.replicate_argmax.assign(static_cast<std::size_t>(replicates), est.max_pair);
    est.max_from_origin.assign(static_cast<std::size_t>(replicates), 0.0);
    return est;
  }

  std::vector<std::pair<Vertex, Vertex>> pairs;
  if (options.fast) {
    pairs.emplace_back(0, n - 1);
    CounterRng rng = CounterRng::stream(seed, {kPairTag, static_cast<std::uint64_t>(n)});
    for (std::int64_t k = 0; k < options.pair_subsample; ++k) {
      Vertex i = static_cast<Vertex>(rng.below(static_cast<std::uint64_t>(n)));
      Vertex j = static_cast<Vertex>(rng.below(static_cast<std::uint64_t>(n - 1)));
      if (j >= i) ++j;
      if (i > j) std::swap(i, j);
      pairs.emplace_back(i, j);
    }
    std::sort(pairs.begin() + 1, pairs.end());
    pairs.erase(std::unique(pairs.begin() + 1, pairs.end()), pairs.end());
    pairs.erase(std::remove(pairs.begin() + 1, pairs.end(), std::pair<Vertex, Vertex>{0, n - 1}),
                pairs.end());
  } else {
    for (Vertex i = 0; i < n; ++i) {
      for (Vertex j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    }
  }
  const std::size_t tracked = pairs.size();

  auto make = [&] {
    Sums s;
    s.sum.assign(tracked, 0.0);
    s.sumsq.assign(tracked, 0.0);
    return s;
  };
  auto accumulate = [&](Sums& s, std::int64_t r) {
    const Environment env = sample_environment({beta, 0, n}, replicate_seed(seed, n, r));
    const Replicate rep = options.fast ? sampled_pairs(env, pairs) : all_pairs(env);
    for (std::size_t k = 0; k < tracked; ++k) {
      s.sum[k] += rep.values[k];
      s.sumsq[k] += rep.values[k] * rep.values[k];
    }
    s.argmax.push_back(rep.argmax);
    s.origin_max.push_back(rep.origin_max);
  };
  auto merge = [&](Sums& total, Sums& part) {
    for (std::size_t k = 0; k < tracked; ++k) {
      total.sum[k] += part.sum[k];
      total.sumsq[k] += part.sumsq[k];
    }
    total.argmax.insert(total.argmax.end(), part.argmax.begin(), part.argmax.end());
    total.origin_max.insert(total.origin_max.end(), part.origin_max.begin(), part.origin_max.end());
  };
  Sums sums = ordered_block_reduce<Sums>(replicates, 1, make, accumulate, merge);

  const double reps = static_cast<double>(replicates);
  std::vector<PairStat> stats(tracked);
  for (std::size_t k = 0; k < tracked; ++k) {
    const double mean = sums.sum[k] / reps;
    const double var = std::max(0.0, (sums.sumsq[k] - reps * mean * mean) / (reps - 1.0));
    stats[k] = {pairs[k].first, pairs[k].second, mean, std::sqrt(var / reps)};
  }
  const auto best = std::max_element(stats.begin(), stats.end(), [](const PairStat& a, const PairStat& b) {
    return a.mean < b.mean;
  });
  est.max_pair = *best;
  est.value = best->mean;
  est.standard_error = best->standard_error;
  est.subsample_max = best->mean;
  for (const auto& s : stats) {
    if (s.mean >= best->mean - best->standard_error) est.tied_pairs.push_back(s);
  }
  std::stable_sort(est.tied_pairs.begin(), est.tied_pairs.end(),
                   [](const PairStat& a, const PairStat& b) { return a.mean > b.mean; });
  est.endpoint_pair = options.fast ? stats.front() : stats[pair_index(n, 0, n - 1)];
  est.replicate_argmax = std::move(sums.argmax);
  est.max_from_origin = std::move(sums.origin_max);
  std::int64_t endpoint_hits = 0;
  for (const auto& a : est.replicate_argmax) endpoint_hits += (a.i == 0 && a.j == n - 1) ? 1 : 0;
  est.endpoint_argmax_fraction = static_cast<double>(endpoint_hits) / reps;
  return est;
}

}  // namespace lrp
