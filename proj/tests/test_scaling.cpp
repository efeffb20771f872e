#include <doctest.h>

#include <cmath>
#include <limits>

#include "lrp/errors.hpp"
#include "lrp/rng.hpp"
#include "lrp/scaling.hpp"

using namespace lrp;

namespace {

std::vector<FitPoint> synthetic(std::span<const double> xs, double c, double a) {
  std::vector<FitPoint> pts;
  for (double x : xs) pts.push_back({x, c * std::pow(x, a), 0.0});
  return pts;
}

HeatKernelTrace stub_trace(std::int64_t n_max, const std::function<double(double)>& p_of_n) {
  HeatKernelTrace t;
  t.p.assign(static_cast<std::size_t>(n_max + 1), 0.0);
  t.leak.assign(t.p.size(), 0.0);
  for (std::int64_t k = 2; k <= n_max; k += 2) t.p[static_cast<std::size_t>(k)] = p_of_n(k / 2.0);
  return t;
}

// OLS slope of log y on log x
double ols_slope(const std::vector<double>& lx, const std::vector<double>& ly) {
  const double n = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("power-law fit examples") {
  const std::vector<double> xs{2, 4, 8};
  const ExponentFit sq = fit_power_law(synthetic(xs, 1.0, 2.0));
  CHECK(std::abs(sq.slope - 2.0) < 1e-12);
  CHECK(sq.residual_max < 1e-12);
  const ExponentFit flat = fit_power_law(synthetic(xs, 5.0, 0.0));
  CHECK(std::abs(flat.slope) < 1e-12);
  CHECK(flat.predict(100.0) == doctest::Approx(5.0));

  const std::vector<double> wide{3, 7, 19, 40, 111, 300, 1000};
  const ExponentFit e = fit_power_law(synthetic(wide, 2.5, -0.37));
  CHECK(std::abs(e.slope + 0.37) < 1e-12);
  CHECK(std::abs(std::exp(e.intercept) - 2.5) < 1e-10);

  auto rng = CounterRng::stream(77, {});
  std::vector<FitPoint> noisy;
  for (int k = 1; k <= 12; ++k) {
    const double x = std::pow(2.0, k);
    const double eps = (rng.uniform() * 2.0 - 1.0) * 0.01;
    noisy.push_back({x, std::pow(x, 0.7) * (1.0 + eps), 0.01 / std::sqrt(3.0) * std::pow(x, 0.7)});
  }
  const ExponentFit nf = fit_power_law(noisy);
  CHECK(nf.weighted);
  CHECK(std::abs(nf.slope - 0.7) <= nf.half_width);
  CHECK(nf.half_width > 0.0);
  CHECK(nf.r_squared > 0.999);
}

TEST_CASE("fit preconditions") {
  const std::vector<double> two{2, 4};
  CHECK_THROWS_AS(fit_power_law(synthetic(two, 1.0, 1.0)), DomainError);
  const ExponentFit loose = fit_power_law_loose(synthetic(two, 1.0, 1.5));
  CHECK(loose.slope == doctest::Approx(1.5));
  CHECK(std::isinf(loose.half_width));
  std::vector<FitPoint> bad{{1, 1, 0}, {2, 0, 0}, {3, 1, 0}};
  CHECK_THROWS_AS(fit_power_law(bad), DomainError);
}

TEST_CASE("Psi inverts phi times psi") {
  for (double delta : {0.2, 0.4, 0.5, 0.9}) {
    for (double c : {1.0, 0.37}) {
      const ScalingFunctions s{delta, c};
      for (int k = -20; k <= 40; ++k) {
        const double t = std::pow(2.0, k * 0.5);
        const double r = s.Psi(t);
        CHECK(std::abs(s.phi(r) * s.psi(r) / t - 1.0) < 1e-10);
      }
      if (c == 1.0) CHECK(s.phi_of_Psi(64.0) == doctest::Approx(std::pow(64.0, 1.0 / (1.0 + delta))));
    }
  }
  CHECK(ScalingFunctions{0.5, 1.0}.exit_exponent() == 3.0);
}

TEST_CASE("delta from a stubbed Lambda backend") {
  const std::vector<std::int64_t> grid{16, 32, 64, 128, 256};
  const LambdaBackend stub = [](double beta, std::int64_t n, std::int64_t reps, std::uint64_t) {
    LambdaEstimate e;
    e.beta = beta;
    e.n = n;
    e.replicates = reps;
    e.value = std::sqrt(static_cast<double>(n));
    return e;
  };
  const DeltaEstimate d = estimate_delta(1.0, grid, 10, 1, stub);
  CHECK(std::abs(d.scaling.delta - 0.5) < 1e-12);
  CHECK(d.lambdas.size() == grid.size());
  const std::vector<std::int64_t> not_dyadic{16, 32, 48, 64, 128};
  CHECK_THROWS_AS(estimate_delta(1.0, not_dyadic, 10, 1, stub), ConfigError);
  const std::vector<std::int64_t> short_grid{16, 32};
  CHECK_THROWS_AS(estimate_delta(1.0, short_grid, 10, 1, stub), ConfigError);
}

TEST_CASE("moment diagnostic ratios") {
  std::vector<LambdaEstimate> ests;
  for (std::int64_t n : {16, 32, 64, 128}) {
    LambdaEstimate e;
    e.n = n;
    e.value = std::pow(static_cast<double>(n), 0.4);
    // max_x R(0,x) = 0.5 or 1.5 times Lambda, half each
    e.max_from_origin = {0.5 * e.value, 1.5 * e.value};
    ests.push_back(e);
  }
  const MomentDiagnostic m1 = moment_diagnostic(ests, 1);
  for (double r : m1.ratio) CHECK(r == doctest::Approx(1.0));
  CHECK(std::abs(m1.fit.slope) < 1e-10);
  const MomentDiagnostic m2 = moment_diagnostic(ests, 2);
  for (double r : m2.ratio) CHECK(r == doctest::Approx(1.25));
}

TEST_CASE("annealed spectral dimension: stub and bare path") {
  const std::vector<std::int64_t> grid{8, 16, 32, 64};
  const TraceBackend stub = [](std::int64_t env, std::int64_t n_max) {
    const double scale = 1.0 + 0.1 * static_cast<double>(env % 3);
    return stub_trace(n_max, [scale](double n) { return scale / std::sqrt(n); });
  };
  const SpectralResult s = spectral_dimension_annealed(1.0, grid, 6, 1, {}, stub);
  CHECK(std::abs(s.d_s - 1.0) < 1e-12);
  CHECK(s.valid);
  CHECK(s.discarded == 0);

  SpectralOptions path;
  path.long_edges = false;
  const std::vector<std::int64_t> g2{64, 128, 256, 512, 1024};
  const SpectralResult p = spectral_dimension_annealed(1.0, g2, 2, 3, path);
  CHECK(std::abs(p.d_s - 1.0) < 0.05);
  CHECK(p.max_leak == 0.0);
}

TEST_CASE("annealed discard rule") {
  const std::vector<std::int64_t> grid{8, 16, 32};
  const TraceBackend stub = [](std::int64_t env, std::int64_t n_max) {
    auto t = stub_trace(n_max, [](double n) { return 1.0 / n; });
    if (env < 2) {
      t.valid = false;
      t.leak.back() = 0.9;
    }
    return t;
  };
  const SpectralResult s = spectral_dimension_annealed(1.0, grid, 20, 1, {}, stub);
  CHECK(s.discarded == 2);
  CHECK(s.discard_rate == doctest::Approx(0.1));
  CHECK_FALSE(s.valid);
  CHECK(s.max_leak == doctest::Approx(0.9));
  // the excluded traces do not enter the mean
  CHECK(s.d_s == doctest::Approx(2.0));
}

TEST_CASE("quenched spectral slopes") {
  const std::vector<std::int64_t> g{64, 128, 256, 512, 1024, 2048, 4096, 8192, 16384};
  const Environment path = Environment::pure_path(-(1 << 16), 1 << 16);
  const SpectralResult q = spectral_dimension_quenched(path, g);
  CHECK(std::abs(q.fit.slope + 0.5) < 0.05);

  // n^{-0.6} log n: the log factor shifts the least-squares slope by the
  // mean of 1/log n, i.e. to about -0.46 on this grid
  const auto t = stub_trace(2 * g.back(), [](double n) { return std::pow(n, -0.6) * std::log(n); });
  const SpectralResult s = spectral_dimension_quenched(t, g);
  std::vector<double> lx, ly;
  for (auto n : g) {
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(std::log(std::pow(static_cast<double>(n), -0.6) * std::log(static_cast<double>(n))));
  }
  CHECK(s.fit.slope == doctest::Approx(ols_slope(lx, ly)).epsilon(1e-10));
  CHECK(s.fit.slope > -0.6);
  CHECK(s.fit.slope < -0.4);
}

TEST_CASE("independent frozen environments give close slopes") {
  const std::vector<std::int64_t> g{16, 32, 64, 128, 256};
  SpectralOptions o;
  const Vertex w = spectral_half_width(2 * g.back(), o);
  const Environment a = sample_environment({1.0, -w, w}, derive_key(5, {0}));
  const Environment b = sample_environment({1.0, -w, w}, derive_key(5, {1}));
  const SpectralResult qa = spectral_dimension_quenched(a, g, o);
  const SpectralResult qb = spectral_dimension_quenched(b, g, o);
  CHECK(std::abs(qa.fit.slope - qb.fit.slope) < 0.1);
}

TEST_CASE("exit-time exponent: stub, discards and the bare path") {
  const std::vector<double> r{2, 4, 8, 16};
  const ExitBackend cube = [](std::int64_t rep, std::span<const double> radii) {
    std::vector<std::optional<double>> out;
    for (double x : radii) {
      if (rep == 0 && x == 16) out.push_back(std::nullopt);
      else out.push_back(x * x * x);
    }
    return out;
  };
  const ExitScaling e = exit_time_exponent(1.0, r, 10, 1, {}, cube);
  CHECK(std::abs(e.fit.slope - 3.0) < 1e-12);
  CHECK(e.discarded.back() == 1);
  CHECK(e.used.back() == 9);
  CHECK(e.max_discard_rate == doctest::Approx(0.1));
  CHECK_FALSE(e.valid);

  ExitScalingOptions bare;
  bare.long_edges = false;
  const std::vector<double> rp{2, 4, 8, 16, 32};
  const ExitScaling p = exit_time_exponent(1.0, rp, 2, 1, bare);
  for (std::size_t i = 0; i < rp.size(); ++i) CHECK(p.mean[i] == doctest::Approx(rp[i] * rp[i]));
  CHECK(std::abs(p.fit.slope - 2.0) < 1e-9);
  CHECK(p.valid);
}

TEST_CASE("Wilson intervals") {
  const WilsonInterval zero = wilson_interval(0, 10);
  CHECK(zero.lo == 0.0);
  CHECK(zero.hi == doctest::Approx(0.27753).epsilon(1e-4));
  const WilsonInterval half = wilson_interval(50, 100);
  CHECK(half.lo == doctest::Approx(0.40383).epsilon(1e-4));
  CHECK(half.hi == doctest::Approx(0.59617).epsilon(1e-4));
  const WilsonInterval all = wilson_interval(10, 10);
  CHECK(all.hi == doctest::Approx(1.0));
}

TEST_CASE("tail curve bookkeeping on fixed samples") {
  // volumes 1..100, resistances 0.1..10
  std::vector<BallSample> samples;
  for (int k = 1; k <= 100; ++k) samples.push_back({double(k), k / 10.0, false, 64});
  samples.push_back({5.0, 1.0, true, 64});
  const ScalingFunctions s{0.5, 1.0};  // phi(4) = 16
  const std::vector<double> lam{1, 2, 4, 8, 16, 32, 64};
  const TailCurve low = tail_curve(TailTag::volume_low, samples, 4.0, lam, s);
  CHECK(low.used == 100);
  CHECK(low.discarded == 1);
  CHECK(low.hits[0] == 16);  // V <= 16
  CHECK(low.hits[1] == 8);
  for (std::size_t i = 0; i < lam.size(); ++i) CHECK(low.hits[i] + low.complement_hits[i] == low.used);
  CHECK(low.monotone_within_ci());

  const TailCurve high = tail_curve(TailTag::volume_high, samples, 4.0, lam, s);
  CHECK(high.hits[0] == 85);  // V >= 16
  CHECK(high.hits[2] == 37);  // V >= 64
  CHECK(high.hits.back() == 0);
  CHECK(high.monotone_within_ci());
  for (std::size_t i = 1; i < lam.size(); ++i) CHECK(high.probability[i] <= high.probability[i - 1]);

  const TailCurve res = tail_curve(TailTag::resistance_low, samples, 4.0, lam, s);
  CHECK(res.hits[0] == 40);  // R <= 4
  CHECK(res.hits[3] == 5);   // R <= 0.5
  CHECK(res.slope < 0.0);

  CHECK(std::string(to_string(TailTag::resistance_low)) == "R-low");
  CHECK(parse_tail_tag("V-high") == TailTag::volume_high);
  CHECK_FALSE(parse_tail_tag("nope").has_value());
}

TEST_CASE("sampled V-low curve complements itself") {
  const std::vector<double> lam{1, 2, 4};
  const ScalingFunctions s{0.4, 1.0};
  const auto samples = sample_balls(1.0, 4.0, 40, 12);
  const TailCurve c = tail_curve(TailTag::volume_low, samples, 4.0, lam, s);
  CHECK(c.hits[0] + c.complement_hits[0] == c.used);
  CHECK(c.used + c.discarded == 40);
  // P[V > phi] counted directly
  std::int64_t above = 0;
  for (const auto& b : samples)
    if (!b.flagged && b.volume > s.phi(4.0)) ++above;
  CHECK(c.complement_hits[0] == above);
  for (const auto& b : samples) {
    if (b.flagged) continue;
    CHECK(b.volume >= 2.0);
    CHECK(b.resistance_to_complement > 0.0);
  }
}

TEST_CASE("good-radius frequency limits") {
  std::vector<BallSample> samples;
  auto rng = CounterRng::stream(3, {});
  for (int k = 0; k < 200; ++k) samples.push_back({10.0 + 50.0 * rng.uniform(), 0.5 + 4.0 * rng.uniform(), false, 64});
  const ScalingFunctions s{0.5, 1.0};
  CHECK(good_radius_frequency(samples, 4.0, 1e6, s).frequency == 1.0);
  CHECK(good_radius_frequency(samples, 4.0, 1.0 + 1e-9, s).frequency < 0.05);
  const GoodRadius g = good_radius_frequency(samples, 4.0, 4.0, s);
  CHECK(g.used == 200);
  CHECK(g.wilson_lo <= g.frequency);
  CHECK(g.frequency <= g.wilson_hi);
}

TEST_CASE("third good-radius condition holds by construction") {
  // every y in B_r(0) has R(0,y) < r = psi(d(0,y)) bound with lambda = 1
  const BallContext ctx = grow_ball_context(1.0, 41, 8.0, WindowPolicy{});
  const ResistanceBall ball = build_ball(ctx, 8.0);
  for (Vertex y : ball.members) CHECK(ctx.profile.at(y) <= 8.0);
}

TEST_CASE("volume scale calibration and inverse volume") {
  std::vector<BallSample> s;
  for (double v : {8.0, 16.0, 32.0, 64.0, 128.0}) s.push_back({v, 1.0, false, 64});
  s.push_back({1e6, 1.0, true, 64});
  // median 32 at r = 4, delta = 0.5 -> c = 2
  CHECK(calibrate_volume_scale(s, 4.0, 0.5) == doctest::Approx(2.0));

  const std::vector<double> radii{2, 4, 8};
  std::vector<std::vector<BallSample>> per_r;
  for (double r : radii) per_r.push_back({{3.0 * r * r, 1.0, false, 64}});
  const InverseVolumeDiagnostic d = inverse_volume_diagnostic(radii, per_r, 0.5);
  for (double m : d.scaled_mean) CHECK(m == doctest::Approx(1.0 / 3.0));
  CHECK(std::abs(d.fit.slope) < 1e-10);
}

TEST_CASE("dyadic chain examples") {
  const auto zero = dyadic_sequence(0, 8);
  for (Vertex v : zero) CHECK(v == 0);
  CHECK(zero.size() == 9);

  const Environment path = Environment::pure_path(0, 256);
  const ChainReport top = dyadic_chain_check(path, 256, 255);
  CHECK(top.m == 8);
  CHECK(top.sequence.back() == 0);
  CHECK(top.resistance == doctest::Approx(255.0));
  CHECK(top.chain_sum == doctest::Approx(255.0));
  CHECK(top.bound == doctest::Approx(255.0));
  CHECK(top.slack == doctest::Approx(0.0).epsilon(1e-9));

  const ChainReport z = dyadic_chain_check(path, 256, 0);
  CHECK(z.resistance == 0.0);
  CHECK(z.bound >= 0.0);

  const Environment env = sample_environment({1.0, 0, 256}, 6);
  auto rng = CounterRng::stream(6, {});
  for (int k = 0; k < 10; ++k) {
    const auto x = static_cast<Vertex>(rng.uniform() * 256);
    const ChainReport c = dyadic_chain_check(env, 256, x);
    CHECK(c.lattice_property);
    CHECK(c.step_property);
    CHECK(c.slack >= -1e-8);
    CHECK(c.chain_sum >= c.resistance - 1e-8);
  }
}
