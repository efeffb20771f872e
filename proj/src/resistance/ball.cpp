#include <string>

#include "lrp/errors.hpp"
#include "lrp/resistance.hpp"

namespace lrp {

namespace {

// Vertices within size/16 of either end (|y| >= W - W/8 on [-W, W)).
struct Margin {
  Vertex low_edge;   // y <= low_edge is in the margin
  Vertex high_edge;  // y >= high_edge is in the margin
  bool contains(Vertex y) const noexcept { return y <= low_edge || y >= high_edge; }
};

Margin margin_of(const Environment& env) {
  const Vertex m = env.size() / 16;
  return {env.lo() + m, env.hi() - m};
}

}  // namespace

BallContext make_ball_context(Environment env) {
  if (!env.contains(0)) throw DomainError("ball window must contain 0");
  if (env.size() < 32) throw DomainError("ball window must have at least 32 vertices");
  const Margin margin = margin_of(env);
  if (margin.contains(0)) throw DomainError("0 lies in the window's boundary margin");
  BallContext ctx;
  ctx.profile = resistance_profile(LinearSystem::assemble_grounded(env, 0, SolverKind::direct), 0);
  std::vector<Vertex> outer;
  for (Vertex y = env.lo(); y < env.hi(); ++y) {
    if (margin.contains(y)) outer.push_back(y);
  }
  ctx.margin_resistance = point_to_set(env, 0, outer).value;
  ctx.env = std::move(env);
  return ctx;
}

ResistanceBall build_ball(const BallContext& ctx, double r) {
  if (!(r > 0.0)) throw DomainError("ball radius must be positive");
  const Margin margin = margin_of(ctx.env);
  ResistanceBall ball;
  ball.center = 0;
  ball.radius = r;
  ball.margin_resistance = ctx.margin_resistance;
  ball.half_width = ctx.env.size() / 2;
  const auto& vs = ctx.profile.vertices;
  const auto& rs = ctx.profile.values;
  // Solver round-off must not pull R(0,y) = r (exactly, e.g. on path
  // segments) into the open ball.
  const double cut = r * (1.0 - 1e-10);
  for (std::size_t k = 0; k < vs.size(); ++k) {
    if (rs[k] < cut) {
      ball.members.push_back(vs[k]);
      ball.volume += ctx.env.full_degree(vs[k]);
      if (margin.contains(vs[k])) ball.touches_window_boundary = true;
    }
  }
  if (ctx.margin_resistance < r) ball.touches_window_boundary = true;
  return ball;
}

ResistanceBall build_ball(const Environment& env, double r) {
  return build_ball(make_ball_context(env), r);
}

BallContext grow_ball_context(double beta, std::uint64_t seed, double r_max,
                              const WindowPolicy& policy, bool long_edges) {
  if (policy.initial_half_width < 16 || policy.max_half_width < policy.initial_half_width) {
    throw ConfigError("window policy: need 16 <= initial_half_width <= max_half_width");
  }
  Vertex w = policy.initial_half_width;
  for (;;) {
    BallContext ctx = make_ball_context(long_edges ? sample_environment({beta, -w, w}, seed)
                                                   : Environment::pure_path(-w, w));
    if (!build_ball(ctx, r_max).touches_window_boundary || w >= policy.max_half_width) return ctx;
    w = std::min(2 * w, policy.max_half_width);
  }
}

}  // namespace lrp
