#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <string>

#include "lrp/errors.hpp"
#include "lrp/parallel.hpp"
#include "lrp/rng.hpp"
#include "lrp/walk.hpp"
#include "window_step.hpp"

namespace lrp {

namespace {

void check_ball(const Environment& env, const ResistanceBall& ball) {
  if (ball.touches_window_boundary) {
    throw DomainError("exit time refused: the ball of radius " + std::to_string(ball.radius) +
                      " touches the window boundary, so its exit time depends on the truncation;"
                      " enlarge the window");
  }
  if (ball.members.empty() || !std::binary_search(ball.members.begin(), ball.members.end(), Vertex{0})) {
    throw DomainError("exit time: ball does not contain 0");
  }
  if (ball.members.front() < env.lo() || ball.members.back() >= env.hi()) {
    throw DomainError("exit time: ball leaves the environment window");
  }
}

}  // namespace

ExitTimeResult expected_exit_time(const Environment& env, const ResistanceBall& ball) {
  check_ball(env, ball);
  const auto& members = ball.members;
  const auto m = static_cast<int>(members.size());
  auto index = [&](Vertex y) -> int {
    const auto it = std::lower_bound(members.begin(), members.end(), y);
    return (it != members.end() && *it == y) ? static_cast<int>(it - members.begin()) : -1;
  };
  SparseMatrix matrix(m, m);
  matrix.reserve(static_cast<Eigen::Index>(m) * 4);
  Eigen::VectorXd rhs(m);
  for (int a = 0; a < m; ++a) {
    const Vertex x = members[static_cast<std::size_t>(a)];
    matrix.startVec(a);
    const auto nb = env.long_neighbors(x);
    auto it = nb.begin();
    auto emit = [&](Vertex y) {
      const int b = index(y);
      if (b >= 0) matrix.insertBack(b, a) = -1.0;
    };
    for (; it != nb.end() && *it < x; ++it) emit(*it);
    if (x > env.lo()) emit(x - 1);
    const double deg = env.full_degree(x);
    matrix.insertBack(a, a) = deg;
    rhs[a] = deg;
    if (x + 1 < env.hi()) emit(x + 1);
    for (; it != nb.end(); ++it) emit(*it);
  }
  matrix.finalize();
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(matrix);
  if (ldlt.info() != Eigen::Success) throw InvariantViolation("exit-time system is not positive definite");
  const Eigen::VectorXd u = ldlt.solve(rhs);

  ExitTimeResult out;
  out.radius = ball.radius;
  out.ball_size = m;
  out.volume = ball.volume;
  out.expected = u[index(0)];
  return out;
}

ExitTimeResult expected_exit_time(const Environment& env, const ResistanceBall& ball,
                                  std::int64_t walkers, std::uint64_t seed) {
  ExitTimeResult out = expected_exit_time(env, ball);
  if (walkers < 2) throw ConfigError("exit time: need at least 2 Monte Carlo walkers");
  std::vector<char> inside(static_cast<std::size_t>(env.size()), 0);
  for (Vertex y : ball.members) inside[static_cast<std::size_t>(y - env.lo())] = 1;
  const auto times = parallel_map(walkers, [&](std::int64_t w) {
    CounterRng rng = CounterRng::stream(seed, {static_cast<std::uint64_t>(w)});
    Vertex x = 0;
    std::int64_t t = 0;
    for (;;) {
      ++t;
      if (!detail::window_step(env, x, rng)) return t;  // left the window, hence the ball
      if (!inside[static_cast<std::size_t>(x - env.lo())]) return t;
    }
  });
  double sum = 0.0;
  double sumsq = 0.0;
  for (auto t : times) {
    sum += static_cast<double>(t);
    sumsq += static_cast<double>(t) * static_cast<double>(t);
  }
  const double n = static_cast<double>(walkers);
  out.mc_walkers = walkers;
  out.mc_mean = sum / n;
  out.mc_se = std::sqrt(std::max(0.0, (sumsq - n * out.mc_mean * out.mc_mean) / (n - 1.0)) / n);
  return out;
}

}  // namespace lrp
