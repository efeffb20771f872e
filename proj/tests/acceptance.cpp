// Acceptance run: one PASS/FAIL line per criterion, numbered 1-11, plus a
// few diagnostic lines. `acceptance 5 10` runs a subset.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "lrp/errors.hpp"
#include "lrp/rng.hpp"
#include "lrp/scaling.hpp"

using namespace lrp;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20240611;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- criterion 1 ----------------------------------------------------------

double quadrature_probability(double beta, std::int64_t k) {
  using boost::math::quadrature::gauss_kronrod;
  const double kd = static_cast<double>(k);
  auto inner = [&](double u) {
    return gauss_kronrod<double, 31>::integrate([&](double v) { return 1.0 / ((v - u) * (v - u)); }, kd,
                                                kd + 1.0, 15, 1e-14);
  };
  return -std::expm1(-beta * gauss_kronrod<double, 31>::integrate(inner, 0.0, 1.0, 15, 1e-14));
}

Outcome edge_law() {
  double worst = 0.0;
  for (double beta : {0.3, 1.0, 2.7})
    for (std::int64_t k : {2, 3, 10, 100})
      worst = std::max(worst, std::abs(edge_probability(beta, k) - quadrature_probability(beta, k)));
  return {worst <= 1e-10, fmt("max |closed form - quadrature| = %.2e (limit 1e-10)", worst)};
}

// ---- criterion 2 ----------------------------------------------------------

// Heavy-ball projected gradient on the Dirichlet energy with f(i)=1, f|_S=0.
double energy_minimisation(const Environment& env, Vertex i, const std::vector<Vertex>& S) {
  const auto n = static_cast<Eigen::Index>(env.size());
  auto idx = [&](Vertex x) { return static_cast<Eigen::Index>(x - env.lo()); };
  std::vector<char> fixed(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd f = Eigen::VectorXd::Constant(n, 0.5);
  for (Vertex s : S) {
    fixed[static_cast<std::size_t>(idx(s))] = 1;
    f[idx(s)] = 0.0;
  }
  fixed[static_cast<std::size_t>(idx(i))] = 1;
  f[idx(i)] = 1.0;
  const SparseMatrix L = LinearSystem::assemble(env).laplacian();
  double max_deg = 0.0;
  for (Vertex x = env.lo(); x < env.hi(); ++x) max_deg = std::max<double>(max_deg, env.degree(x));
  const double step = 1.0 / (2.0 * max_deg);
  Eigen::VectorXd prev = f;
  for (int it = 0; it < 400000; ++it) {
    Eigen::VectorXd g = 2.0 * (L * f);
    Eigen::VectorXd next = f - step * g + 0.95 * (f - prev);
    for (Eigen::Index k = 0; k < n; ++k)
      if (fixed[static_cast<std::size_t>(k)]) next[k] = f[k];
    prev = f;
    f = next;
    if (it % 1000 == 0) {
      double free_grad = 0.0;
      for (Eigen::Index k = 0; k < n; ++k)
        if (!fixed[static_cast<std::size_t>(k)]) free_grad = std::max(free_grad, std::abs(g[k]));
      if (free_grad < 1e-13) break;
    }
  }
  return 1.0 / f.dot(L * f);
}

Outcome resistance_oracles() {
  double series = 0.0, parallel = 0.0, energy = 0.0;
  for (Vertex n : {2, 3, 10, 64, 1000}) {
    const Environment path = Environment::pure_path(0, n);
    series = std::max(series, std::abs(two_point(LinearSystem::assemble(path), 0, n - 1).value - (n - 1.0)));
    if (n > 2) {
      const Environment bridged = path.with_edge(0, n - 1);
      parallel = std::max(parallel,
                          std::abs(two_point(LinearSystem::assemble(bridged), 0, n - 1).value - (n - 1.0) / n));
    }
  }
  auto rng = CounterRng::stream(derive_key(kSeed, {2}), {});
  for (std::uint64_t e = 0; e < 50; ++e) {
    const Environment env = sample_environment({1.0, 0, 64}, derive_key(kSeed, {2, e}));
    const auto i = static_cast<Vertex>(rng.below(64));
    Vertex j = i;
    while (j == i) j = static_cast<Vertex>(rng.below(64));
    const LinearSystem sys = LinearSystem::assemble(env);
    energy = std::max(energy, std::abs(two_point(sys, i, j).value - energy_minimisation(env, i, {j})));
    std::set<Vertex> S;
    while (S.size() < 3) {
      const auto s = static_cast<Vertex>(rng.below(64));
      if (s != i) S.insert(s);
    }
    const std::vector<Vertex> target(S.begin(), S.end());
    energy = std::max(energy, std::abs(point_to_set(env, i, target).value - energy_minimisation(env, i, target)));
  }
  const bool ok = series < 1e-6 && parallel < 1e-6 && energy < 1e-6;
  return {ok, fmt("series err %.1e, parallel err %.1e, energy-minimisation err %.1e over 50 envs (limit 1e-6)",
                  series, parallel, energy)};
}

// ---- criterion 3 ----------------------------------------------------------

Outcome metric_properties() {
  constexpr double slack = 1e-9;
  auto rng = CounterRng::stream(derive_key(kSeed, {3}), {});
  int triangle = 0, rayleigh = 0, restriction = 0;
  for (std::uint64_t e = 0; e < 10; ++e) {
    const Environment env = sample_environment({1.0, 0, 128}, derive_key(kSeed, {3, 0, e}));
    const LinearSystem sys = LinearSystem::assemble(env);
    for (int t = 0; t < 100; ++t) {
      const auto x = static_cast<Vertex>(rng.below(128)), y = static_cast<Vertex>(rng.below(128)),
                 z = static_cast<Vertex>(rng.below(128));
      const double rxz = two_point(sys, x, z).value;
      if (rxz > two_point(sys, x, y).value + two_point(sys, y, z).value + slack * std::max(1.0, rxz)) ++triangle;
    }
  }
  for (std::uint64_t t = 0; t < 100; ++t) {
    const Environment env = sample_environment({1.0, 0, 96}, derive_key(kSeed, {3, 1, t}));
    Vertex a = 0, b = 0;
    do {
      a = static_cast<Vertex>(rng.below(96));
      b = static_cast<Vertex>(rng.below(96));
    } while (std::abs(a - b) < 2 || env.has_long_edge(std::min(a, b), std::max(a, b)));
    const LinearSystem before = LinearSystem::assemble(env);
    const LinearSystem after = LinearSystem::assemble(env.with_edge(std::min(a, b), std::max(a, b)));
    for (int q = 0; q < 10; ++q) {
      const auto i = static_cast<Vertex>(rng.below(96)), j = static_cast<Vertex>(rng.below(96));
      const double r0 = two_point(before, i, j).value;
      if (two_point(after, i, j).value > r0 + slack * std::max(1.0, r0)) ++rayleigh;
    }
    // [lo, hi) inside [0, 96)
    const auto lo = static_cast<Vertex>(rng.below(40));
    const Vertex hi = lo + 8 + static_cast<Vertex>(rng.below(static_cast<std::uint64_t>(96 - lo - 8 + 1)));
    const Vertex i = lo + static_cast<Vertex>(rng.below(static_cast<std::uint64_t>(hi - lo)));
    const Vertex j = lo + static_cast<Vertex>(rng.below(static_cast<std::uint64_t>(hi - lo)));
    const double inner = two_point(LinearSystem::assemble(env, lo, hi), i, j).value;
    const double outer = two_point(before, i, j).value;
    if (inner < outer - slack * std::max(1.0, outer)) ++restriction;
  }
  return {triangle + rayleigh + restriction == 0,
          fmt("failures: triangle %d/1000, Rayleigh %d/1000 (100 insertions), restriction %d/100 (slack 1e-9 rel)",
              triangle, rayleigh, restriction)};
}

// ---- criterion 4 ----------------------------------------------------------

Outcome heat_kernel_exactness() {
  double diag = 0.0, sym = 0.0, mass = 0.0;
  int windows = 0;
  for (double beta : {0.5, 1.0, 2.0}) {
    for (Vertex len : {9, 32, 64}) {
      const Environment env = sample_environment({beta, 0, len}, derive_key(kSeed, {4, static_cast<std::uint64_t>(len)}));
      ++windows;
      std::vector<std::vector<double>> rows8;
      for (Vertex x = 0; x < len; ++x) {
        HeatKernelOptions o;
        o.keep_final_row = true;
        o.leak_tolerance = 1.0;
        const HeatKernelTrace t = evolve_heat_kernel(env, x, 8, o);
        mass = std::max(mass, t.mass_error);
        for (std::int64_t n = 0; n <= 8; ++n) {
          const double d = dense_heat_kernel_row(env, x, n)[static_cast<std::size_t>(x)];
          diag = std::max(diag, std::abs(t.p[static_cast<std::size_t>(n)] - d));
        }
        rows8.push_back(t.final_row);
      }
      for (Vertex x = 0; x < len; ++x)
        for (Vertex y = 0; y < len; ++y)
          sym = std::max(sym, std::abs(rows8[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)] -
                                       rows8[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)]));
    }
  }
  const bool ok = diag <= 1e-12 && sym <= 1e-12 && mass <= 1e-12;
  return {ok, fmt("%d windows, n<=8: diag err %.1e, symmetry err %.1e, mass err %.1e (limit 1e-12)", windows, diag,
                  sym, mass)};
}

// ---- criterion 5 ----------------------------------------------------------

Outcome pure_path_control() {
  std::vector<std::int64_t> grid;
  for (int k = 6; k <= 14; ++k) grid.push_back(std::int64_t{1} << k);
  SpectralOptions so;
  so.long_edges = false;
  const Vertex w = spectral_half_width(2 * grid.back(), so);
  const SpectralResult q = spectral_dimension_quenched(Environment::pure_path(-w, w), grid, so);
  ExitScalingOptions eo;
  eo.long_edges = false;
  const std::vector<double> radii{2, 4, 8, 16, 32};
  const ExitScaling e = exit_time_exponent(1.0, radii, 2, kSeed, eo);
  const bool ok = std::abs(q.fit.slope + 0.5) <= 0.05 && std::abs(e.fit.slope - 2.0) <= 0.05 && q.valid && e.valid;
  return {ok, fmt("quenched slope %.4f (want -0.5 +- 0.05), exit slope %.4f (want 2.0 +- 0.05)", q.fit.slope,
                  e.fit.slope)};
}

// ---- criterion 6 ----------------------------------------------------------

std::map<double, DeltaEstimate> g_delta;

std::vector<std::int64_t> delta_grid() {
  std::vector<std::int64_t> g;
  for (int k = 4; k <= 10; ++k) g.push_back(std::int64_t{1} << k);
  return g;
}

const DeltaEstimate& delta_for(double beta) {
  auto it = g_delta.find(beta);
  if (it == g_delta.end()) {
    const auto grid = delta_grid();
    it = g_delta.emplace(beta, estimate_delta(beta, grid, 200, derive_key(kSeed, {6, std::bit_cast<std::uint64_t>(beta)})))
             .first;
  }
  return it->second;
}

Outcome headline_consistency() {
  std::vector<std::int64_t> grid;  // 2n in 2^6..2^12
  for (int k = 5; k <= 11; ++k) grid.push_back(std::int64_t{1} << k);
  bool ok = true;
  std::string detail;
  for (double beta : {0.5, 1.0, 2.0}) {
    const DeltaEstimate& d = delta_for(beta);
    const double delta = d.scaling.delta;
    const double target = -1.0 / (1.0 + delta);
    const std::uint64_t bs = derive_key(kSeed, {6, std::bit_cast<std::uint64_t>(beta), 1});
    const SpectralResult a = spectral_dimension_annealed(beta, grid, 200, bs);
    const bool a_ok = std::abs(a.fit.slope - target) <= 0.1 && a.valid;
    ok = ok && a_ok;
    detail += fmt("[beta=%.1f delta=%.3f+-%.3f target slope %.3f; annealed %.3f (discard %.3f)%s; quenched", beta,
                  delta, d.fit.half_width, target, a.fit.slope, a.discard_rate, a_ok ? "" : " X");
    SpectralOptions so;
    const TraceBackend frozen = window_trace_backend(beta, derive_key(bs, {2}), so);
    for (std::int64_t e = 0; e < 3; ++e) {
      const SpectralResult q = spectral_dimension_quenched(frozen(e, 2 * grid.back()), grid, so);
      const bool q_ok = std::abs(q.fit.slope - target) <= 0.15 && q.valid;
      ok = ok && q_ok;
      detail += fmt(" %.3f%s", q.fit.slope, q_ok ? "" : (q.valid ? " X" : " X(leak)"));
    }
    detail += "] ";
  }
  return {ok, detail};
}

// ---- criterion 7 ----------------------------------------------------------

Outcome exit_scaling() {
  const double delta = delta_for(1.0).scaling.delta;
  ExitScalingOptions eo;
  eo.window.max_half_width = Vertex{1} << 22;
  const std::vector<double> radii{2, 4, 8, 16, 32};
  const ExitScaling e = exit_time_exponent(1.0, radii, 200, derive_key(kSeed, {7}), eo);
  const double want = (1.0 + delta) / delta;
  const bool ok = e.valid && e.max_discard_rate < 0.05 && std::abs(e.fit.slope - want) <= 0.25;
  std::string means;
  for (double m : e.mean) means += fmt(" %.4g", m);
  return {ok, fmt("slope %.3f +- %.3f vs (1+delta)/delta = %.3f (tol 0.25), discard %.3f; means", e.fit.slope,
                  e.fit.half_width, want, e.max_discard_rate) +
                  means};
}

// ---- criteria 8 and 9 -----------------------------------------------------

std::vector<BallSample> g_balls;
ScalingFunctions g_tail_scaling;
const std::vector<double> kLambda{2, 4, 8, 16, 32, 64};

void ensure_balls() {
  if (!g_balls.empty()) return;
  const double delta = delta_for(1.0).scaling.delta;
  WindowPolicy pol;
  pol.max_half_width = Vertex{1} << 22;
  g_balls = sample_balls(1.0, 8.0, 2000, derive_key(kSeed, {8}), pol);
  g_tail_scaling = {delta, calibrate_volume_scale(g_balls, 8.0, delta)};
}

std::string curve_text(const TailCurve& c) {
  std::string s = fmt("%s slope %.2f, P =", to_string(c.tag), c.slope);
  for (double p : c.probability) s += fmt(" %.4f", p);
  return s;
}

Outcome tail_decay() {
  ensure_balls();
  bool ok = true;
  std::string detail = fmt("c = %.3f, used %lld: ", g_tail_scaling.volume_scale,
                           static_cast<long long>(g_balls.size()));
  for (TailTag tag : {TailTag::volume_low, TailTag::volume_high, TailTag::resistance_low}) {
    const TailCurve c = tail_curve(tag, g_balls, 8.0, kLambda, g_tail_scaling);
    bool good = c.monotone_within_ci() && c.positive_points >= 2 && c.slope < 0.0;
    if (tag == TailTag::volume_low) good = good && c.slope <= -1.0;
    ok = ok && good;
    detail += curve_text(c) + (good ? "; " : " X; ");
    if (tag == TailTag::volume_low) detail = fmt("discarded %lld, ", static_cast<long long>(c.discarded)) + detail;
  }
  return {ok, detail};
}

Outcome good_radius() {
  ensure_balls();
  const TailCurve c = tail_curve(TailTag::good_radius, g_balls, 8.0, kLambda, g_tail_scaling);
  bool decreasing = true;
  for (std::size_t i = 1; i < c.probability.size(); ++i)
    decreasing = decreasing && c.probability[i] <= c.probability[i - 1];
  const bool ok = decreasing && c.positive_points >= 2 && c.slope < 0.0;
  return {ok, "1 - P[r in J]: " + curve_text(c)};
}

// ---- criterion 10 ---------------------------------------------------------

Outcome chaining() {
  auto rng = CounterRng::stream(derive_key(kSeed, {10}), {});
  int broken = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  for (std::uint64_t d = 0; d < 100; ++d) {
    const Environment env = sample_environment({1.0, 0, 256}, derive_key(kSeed, {10, d}));
    const auto x = static_cast<Vertex>(rng.below(256));
    try {
      const ChainReport r = dyadic_chain_check(env, 256, x);
      if (!r.lattice_property || !r.step_property || r.sequence.back() != 0) ++broken;
      min_slack = std::min(min_slack, r.slack);
    } catch (const InvariantViolation&) {
      ++broken;
    }
  }
  return {broken == 0 && min_slack >= -1e-8,
          fmt("100 draws at n=256: construction failures %d, min slack %.4g (limit -1e-8)", broken, min_slack)};
}

// ---- criterion 11 ---------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome reproducibility() {
  const fs::path dir = fs::temp_directory_path() / ("lrp_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "full.yaml") << "command: full-pipeline\n"
                                      "beta: [1.0]\n"
                                      "seed: 11\n"
                                      "n: [16, 32, 64, 128, 256]\n"
                                      "replicates: 32\n"
                                      "spectral_n: [16, 32, 64, 128, 256]\n"
                                      "environments: 32\n"
                                      "quenched: 1\n"
                                      "r: [2, 4, 8]\n"
                                      "exit_replicates: 16\n"
                                      "tail_r: 4\n"
                                      "lambda: [2, 4, 8]\n"
                                      "tail_replicates: 100\n";
  auto invoke = [&] {
    const std::string cmd = std::string(LRP_TOOL_PATH) + " full-pipeline --config " + (dir / "full.yaml").string() +
                            " --out " + (dir / "out").string() + " --force 2>/dev/null >/dev/null";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  };
  const int rc1 = invoke();
  const std::string first = slurp(dir / "out" / "full-pipeline" / "summary.json");
  const int rc2 = invoke();
  const std::string second = slurp(dir / "out" / "full-pipeline" / "summary.json");
  fs::remove_all(dir);
  const bool ok = rc1 == rc2 && (rc1 == 0 || rc1 == 1) && !first.empty() && first == second;
  return {ok, fmt("exit codes %d/%d, summary %zu bytes, identical: %s", rc1, rc2, first.size(),
                  first == second ? "yes" : "no")};
}

// ---- diagnostics ----------------------------------------------------------

void diagnostics() {
  const DeltaEstimate& d = delta_for(1.0);
  for (int order : {1, 2, 4}) {
    const MomentDiagnostic m = moment_diagnostic(d.lambdas, order);
    std::printf("diagnostic moments order %d: ratio slope %.3f (bounded if within 0.15 of 0)\n", order, m.fit.slope);
  }
  const std::vector<double> radii{2, 4, 8, 16};
  std::vector<std::vector<BallSample>> per_r;
  WindowPolicy pol;
  pol.max_half_width = Vertex{1} << 22;
  for (double r : radii)
    per_r.push_back(sample_balls(1.0, r, 200, derive_key(kSeed, {12, std::bit_cast<std::uint64_t>(r)}), pol));
  const InverseVolumeDiagnostic iv = inverse_volume_diagnostic(radii, per_r, d.scaling.delta);
  std::string vals;
  for (double v : iv.scaled_mean) vals += fmt(" %.4g", v);
  std::printf("diagnostic inverse volume: E[1/V] r^(1/delta) =%s, slope %.3f (bounded if within 0.2 of 0)\n",
              vals.c_str(), iv.fit.slope);
  // window sufficiency: same environments (global field) on W and 2W
  double worst = 0.0, leak = 0.0;
  for (std::uint64_t e = 0; e < 3; ++e) {
    const Vertex w = 8 * 2048;
    const std::uint64_t key = derive_key(kSeed, {13, e});
    const HeatKernelTrace a = evolve_heat_kernel(sample_environment({1.0, -w, w}, key), 0, 4096);
    const HeatKernelTrace b = evolve_heat_kernel(sample_environment({1.0, -2 * w, 2 * w}, key), 0, 4096);
    worst = std::max(worst, std::abs(a.p.back() / b.p.back() - 1.0));
    leak = std::max(leak, a.total_leak());
  }
  std::printf("diagnostic window doubling at 2n = 4096, beta = 1: max relative change of p_2n %.2e (max leak %.3f)\n",
              worst, leak);
  if (!g_balls.empty()) {
    const ScalingFunctions unit{d.scaling.delta, 1.0};
    const TailCurve c = tail_curve(TailTag::volume_low, g_balls, 8.0, kLambda, unit);
    std::printf("diagnostic V-low with c = 1: %s\n", curve_text(c).c_str());
  }
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, edge_law},         {2, resistance_oracles}, {3, metric_properties}, {4, heat_kernel_exactness},
      {5, pure_path_control}, {6, headline_consistency}, {7, exit_scaling},     {8, tail_decay},
      {9, good_radius},      {10, chaining},           {11, reproducibility}};
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %s (%.1fs) %s\n", id, o.pass ? "PASS" : "FAIL", sec, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  if (wanted.empty() || wanted.count(0)) diagnostics();
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
