#include <cmath>
#include <string>

#include "lrp/errors.hpp"
#include "lrp/model.hpp"
#include "lrp/parallel.hpp"
#include "lrp/rng.hpp"

namespace lrp {

namespace {

std::int64_t checked_power(std::int64_t m, int e) {
  std::int64_t out = 1;
  for (int i = 0; i < e; ++i) {
    if (out > (std::int64_t{1} << 26) / m) {
      throw ConfigError("bridging window m^(n+1) exceeds 2^26 vertices");
    }
    out *= m;
  }
  return out;
}

void check_args(std::int64_t m, int n) {
  if (m < 3) throw ConfigError("bridging: m must be >= 3, got " + std::to_string(m));
  if (n < 0) throw ConfigError("bridging: n must be >= 0, got " + std::to_string(n));
}

void check_window(const Environment& env, std::int64_t total) {
  if (env.lo() > 0 || env.hi() < total) {
    throw ConfigError("bridging: environment window does not contain [0, m^(n+1))");
  }
}

}  // namespace

std::vector<bool> unbridged_blocks(const Environment& env, std::int64_t m, int n) {
  check_args(m, n);
  const std::int64_t block = checked_power(m, n);
  const std::int64_t total = block * m;
  check_window(env, total);
  // Edge <a,b> bridges every block index i with a < i*block and
  // b >= (i+1)*block, i.e. i in [a/block + 1, b/block - 1].
  std::vector<std::int64_t> diff(static_cast<std::size_t>(m + 1), 0);
  for (const auto& e : env.long_edges()) {
    if (e.a < 0 || e.b >= total) continue;
    const std::int64_t first = e.a / block + 1;
    const std::int64_t last = e.b / block - 1;
    if (first > last) continue;
    ++diff[static_cast<std::size_t>(first)];
    --diff[static_cast<std::size_t>(last + 1)];
  }
  std::vector<bool> out;
  out.reserve(static_cast<std::size_t>(m - 2));
  std::int64_t running = diff[0];
  for (std::int64_t i = 1; i <= m - 2; ++i) {
    running += diff[static_cast<std::size_t>(i)];
    out.push_back(running == 0);
  }
  return out;
}

std::vector<bool> unbridged_blocks_bruteforce(const Environment& env, std::int64_t m, int n) {
  check_args(m, n);
  const std::int64_t block = checked_power(m, n);
  const std::int64_t total = block * m;
  check_window(env, total);
  std::vector<bool> out;
  for (std::int64_t i = 1; i <= m - 2; ++i) {
    bool bridged = false;
    for (const auto& e : env.long_edges()) {
      if (e.a >= 0 && e.a < i * block && e.b >= (i + 1) * block && e.b < total) {
        bridged = true;
        break;
      }
    }
    out.push_back(!bridged);
  }
  return out;
}

BridgingStats bridging_statistics(double beta, std::int64_t m, int n, std::int64_t replicates,
                                  std::uint64_t seed) {
  check_args(m, n);
  if (replicates < 1) throw ConfigError("bridging: replicates must be >= 1");
  const std::int64_t total = checked_power(m, n + 1);
  const ModelParams params{beta, 0, total};
  params.validate();
  const auto flags = parallel_map(replicates, [&](std::int64_t r) {
    return unbridged_blocks(sample_environment(params, derive_key(seed, {static_cast<std::uint64_t>(r)})),
                            m, n);
  });
  BridgingStats stats;
  stats.m = m;
  stats.n = n;
  stats.replicates = replicates;
  for (std::int64_t i = 0; i < m - 2; ++i) {
    std::int64_t hits = 0;
    for (const auto& f : flags) hits += f[static_cast<std::size_t>(i)] ? 1 : 0;
    const double p = static_cast<double>(hits) / static_cast<double>(replicates);
    stats.unbridged_frequency.push_back(p);
    stats.standard_error.push_back(std::sqrt(p * (1.0 - p) / static_cast<double>(replicates)));
  }
  return stats;
}

}  // namespace lrp
