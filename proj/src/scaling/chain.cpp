#include <algorithm>
#include <string>

#include "lrp/errors.hpp"
#include "lrp/scaling.hpp"

namespace lrp {

namespace {

// R between the ends of the closed interval [a, b], using only its edges.
double interval_resistance(const Environment& env, Vertex a, Vertex b) {
  if (a == b) return 0.0;
  const LinearSystem sys = LinearSystem::assemble(env, a, b + 1);
  return two_point(sys, a, b).value;
}

}  // namespace

std::vector<Vertex> dyadic_sequence(Vertex x, int m) {
  std::vector<Vertex> seq{x};
  for (int l = 1; l <= m; ++l) {
    const Vertex prev = seq.back();
    const Vertex step = Vertex{1} << l;
    seq.push_back(prev % step == 0 ? prev : prev - (step >> 1));
  }
  return seq;
}

ChainReport dyadic_chain_check(const Environment& env, std::int64_t n, Vertex x) {
  if (n < 1) throw DomainError("chain check: n must be >= 1");
  if (x < 0 || x >= n) throw DomainError("chain check: x = " + std::to_string(x) + " outside [0, n)");
  if (!env.contains(0) || !env.contains(n - 1)) throw DomainError("chain check: window must contain [0, n)");
  ChainReport rep;
  rep.n = n;
  rep.x = x;
  while ((std::int64_t{1} << rep.m) < n) ++rep.m;
  rep.sequence = dyadic_sequence(x, rep.m);

  for (int l = 0; l <= rep.m; ++l) {
    const Vertex v = rep.sequence[static_cast<std::size_t>(l)];
    if (v % (Vertex{1} << l) != 0 || v < 0 || v >= n) rep.lattice_property = false;
    if (l < rep.m) {
      const Vertex d = v - rep.sequence[static_cast<std::size_t>(l) + 1];
      if (d != 0 && d != (Vertex{1} << l)) rep.step_property = false;
    }
  }
  if (rep.sequence.back() != 0) rep.lattice_property = false;
  if (!rep.lattice_property || !rep.step_property) {
    throw InvariantViolation("chain check: dyadic sequence for x = " + std::to_string(x) +
                             " breaks the lattice or step property");
  }

  rep.resistance = x == 0 ? 0.0 : two_point(LinearSystem::assemble(env, 0, n), 0, x).value;
  for (int l = 0; l < rep.m; ++l) {
    rep.chain_sum += interval_resistance(env, rep.sequence[static_cast<std::size_t>(l) + 1],
                                         rep.sequence[static_cast<std::size_t>(l)]);
    const Vertex step = Vertex{1} << l;
    double worst = 0.0;
    for (Vertex y = step; y < (Vertex{1} << rep.m) && y <= n - 1; y += step) {
      worst = std::max(worst, interval_resistance(env, y - step, y));
    }
    rep.bound += worst;
  }
  rep.slack = rep.bound - rep.resistance;
  return rep;
}

}  // namespace lrp
