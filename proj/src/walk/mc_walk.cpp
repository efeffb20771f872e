#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>
#include <string>
#include <unordered_set>

#include "lrp/errors.hpp"
#include "lrp/parallel.hpp"
#include "lrp/rng.hpp"
#include "lrp/walk.hpp"
#include "window_step.hpp"

namespace lrp {

namespace {

constexpr std::int64_t kWalkerBlock = 64;

struct Moments {
  std::vector<double> at_zero, x, x2, x4, abs_x, max_abs, range, degree_sum, escaped, alive;

  explicit Moments(std::size_t k = 0)
      : at_zero(k), x(k), x2(k), x4(k), abs_x(k), max_abs(k), range(k), degree_sum(k), escaped(k),
        alive(k) {}

  void merge(const Moments& o) {
    auto add = [](std::vector<double>& a, const std::vector<double>& b) {
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    add(at_zero, o.at_zero); add(x, o.x); add(x2, o.x2); add(x4, o.x4); add(abs_x, o.abs_x);
    add(max_abs, o.max_abs); add(range, o.range); add(degree_sum, o.degree_sum);
    add(escaped, o.escaped); add(alive, o.alive);
  }
};

// One step from x: returns false when the walker takes a window-leaving edge.
struct LazyStepper {
  LazyEnvironment& env;
  int degree(Vertex x) { return env.degree(x); }
  bool step(Vertex& x, CounterRng& rng) {
    const auto& nb = env.reveal(x);
    const auto u = rng.below(2 + nb.size());
    x = u == 0 ? x - 1 : u == 1 ? x + 1 : nb[u - 2];
    return true;
  }
};

struct WindowStepper {
  const Environment& env;
  int degree(Vertex x) { return env.full_degree(x); }
  bool step(Vertex& x, CounterRng& rng) { return detail::window_step(env, x, rng); }
};

template <class Stepper>
void run_walker(Stepper& stepper, CounterRng& rng, const WalkOptions& opt, Moments& acc) {
  std::unordered_set<Vertex> visited{0};
  double degree_sum = stepper.degree(0);
  Vertex x = 0;
  Vertex max_abs = 0;
  bool alive = true;
  std::size_t next = 0;
  const auto& times = opt.record_times;
  for (std::int64_t t = 0; next < times.size(); ++t) {
    while (next < times.size() && times[next] == t) {
      if (alive) {
        const double xd = static_cast<double>(x);
        acc.at_zero[next] += x == 0 ? 1.0 : 0.0;
        acc.x[next] += xd;
        acc.x2[next] += xd * xd;
        acc.x4[next] += xd * xd * xd * xd;
        acc.abs_x[next] += std::abs(xd);
        acc.max_abs[next] += static_cast<double>(max_abs);
        acc.range[next] += static_cast<double>(visited.size());
        acc.degree_sum[next] += degree_sum;
        acc.alive[next] += 1.0;
      } else {
        acc.escaped[next] += 1.0;
      }
      ++next;
    }
    if (next >= times.size() || !alive) {
      if (!alive) {
        for (; next < times.size(); ++next) acc.escaped[next] += 1.0;
      }
      break;
    }
    if (!stepper.step(x, rng)) {
      alive = false;
      continue;
    }
    max_abs = std::max(max_abs, x < 0 ? -x : x);
    if (visited.insert(x).second) degree_sum += stepper.degree(x);
  }
}

void check_options(const WalkOptions& opt) {
  if (opt.steps < 0) throw ConfigError("walk: steps must be >= 0");
  if (opt.walkers < 1) throw ConfigError("walk: walkers must be >= 1");
  for (auto t : opt.record_times) {
    if (t < 0 || t > opt.steps) {
      throw ConfigError("walk: record time " + std::to_string(t) + " outside [0, steps]");
    }
  }
  if (!std::is_sorted(opt.record_times.begin(), opt.record_times.end()) ||
      std::adjacent_find(opt.record_times.begin(), opt.record_times.end()) != opt.record_times.end()) {
    throw ConfigError("walk: record times must be strictly increasing");
  }
}

template <class RunOne>
WalkStats collect(double beta, const WalkOptions& opt, RunOne&& run_one) {
  check_options(opt);
  const std::size_t k = opt.record_times.size();
  Moments total = ordered_block_reduce<Moments>(
      opt.walkers, kWalkerBlock, [&] { return Moments(k); },
      [&](Moments& acc, std::int64_t w) { run_one(w, acc); },
      [](Moments& into, const Moments& part) { into.merge(part); });
  WalkStats stats;
  stats.beta = beta;
  stats.seed = opt.seed;
  stats.steps = opt.steps;
  stats.walkers = opt.walkers;
  const double n = static_cast<double>(opt.walkers);
  for (std::size_t i = 0; i < k; ++i) {
    WalkRecord r;
    r.time = opt.record_times[i];
    r.return_frequency = total.at_zero[i] / n;
    r.return_se = std::sqrt(r.return_frequency * (1.0 - r.return_frequency) / n);
    r.escaped_fraction = total.escaped[i] / n;
    const double alive = total.alive[i];
    if (alive > 0) {
      r.mean_x = total.x[i] / alive;
      r.mean_x2 = total.x2[i] / alive;
      const double var_x2 = std::max(0.0, total.x4[i] / alive - r.mean_x2 * r.mean_x2);
      r.se_x2 = std::sqrt(var_x2 / alive);
      r.mean_abs_x = total.abs_x[i] / alive;
      r.mean_max_abs = total.max_abs[i] / alive;
      r.mean_range = total.range[i] / alive;
      r.mean_degree_sum = total.degree_sum[i] / alive;
    }
    stats.records.push_back(r);
  }
  return stats;
}

}  // namespace

WalkStats mc_walk_annealed(double beta, std::uint64_t env_seed, const WalkOptions& options,
                           bool long_edges) {
  return collect(beta, options, [&](std::int64_t w, Moments& acc) {
    LazyEnvironment env(beta, derive_key(env_seed, {static_cast<std::uint64_t>(w)}), long_edges);
    LazyStepper stepper{env};
    CounterRng rng = CounterRng::stream(options.seed, {static_cast<std::uint64_t>(w)});
    run_walker(stepper, rng, options, acc);
  });
}

WalkStats mc_walk_quenched(LazyEnvironment& env, const WalkOptions& options) {
  return collect(env.beta(), options, [&](std::int64_t w, Moments& acc) {
    LazyStepper stepper{env};
    CounterRng rng = CounterRng::stream(options.seed, {static_cast<std::uint64_t>(w)});
    run_walker(stepper, rng, options, acc);
  });
}

WalkStats mc_walk_window(const Environment& env, const WalkOptions& options) {
  if (!env.contains(0)) throw DomainError("walk window must contain 0");
  return collect(env.beta(), options, [&](std::int64_t w, Moments& acc) {
    WindowStepper stepper{env};
    CounterRng rng = CounterRng::stream(options.seed, {static_cast<std::uint64_t>(w)});
    run_walker(stepper, rng, options, acc);
  });
}

void write_walk_csv(std::ostream& out, const WalkStats& stats, bool header) {
  if (header) out << "beta,seed,n,walkers,return_freq,mean_absX,range,degree_sum\n";
  char line[256];
  for (const auto& r : stats.records) {
    std::snprintf(line, sizeof line, "%.17g,%llu,%lld,%lld,%.17g,%.17g,%.17g,%.17g\n", stats.beta,
                  static_cast<unsigned long long>(stats.seed), static_cast<long long>(r.time),
                  static_cast<long long>(stats.walkers), r.return_frequency, r.mean_abs_x,
                  r.mean_range, r.mean_degree_sum);
    out << line;
  }
}

}  // namespace lrp
