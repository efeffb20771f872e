#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unistd.h>

#include "lrp/cli.hpp"
#include "lrp/errors.hpp"
#include "lrp/parallel.hpp"
#include "lrp/resistance.hpp"
#include "lrp/rng.hpp"
#include "lrp/scaling.hpp"
#include "lrp/walk.hpp"

namespace lrp::cli {

namespace {

// Stream tags under each beta's seed. Lambda replicates use the beta seed
// directly so delta agrees across commands.
constexpr std::uint64_t kSpectralTag = 0x5350;
constexpr std::uint64_t kQuenchedTag = 0x5155;
constexpr std::uint64_t kExitTag = 0x4558;
constexpr std::uint64_t kBallTag = 0x424c;
constexpr std::uint64_t kChainTag = 0x4348;
constexpr std::uint64_t kSampleTag = 0x534d;
constexpr std::uint64_t kWalkTag = 0x574b;

std::uint64_t beta_seed(std::uint64_t base, double beta) {
  return derive_key(base, {std::bit_cast<std::uint64_t>(beta)});
}

std::string num(double d) {
  if (std::isnan(d)) return "nan";
  if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, p);
}

// JSON has no inf/nan; they become null.
Json jnum(double d) { return std::isfinite(d) ? Json(d) : Json(nullptr); }

Json fit_json(const ExponentFit& f) {
  return {{"slope", jnum(f.slope)},         {"intercept", jnum(f.intercept)},
          {"slope_se", jnum(f.slope_se)},   {"half_width", jnum(f.half_width)},
          {"r_squared", jnum(f.r_squared)}, {"weighted", f.weighted}};
}

struct Artifacts {
  Json summary = Json::object();
  std::vector<std::pair<std::string, std::string>> files;
  Json discard_rates = Json::object();
  int status = 0;
  std::vector<std::string> problems;

  void fail(int code, const std::string& why) {
    // invariant violations outrank numeric-validity failures
    if (status == 0 || (code == 1 && status == 3)) status = code;
    problems.push_back(why);
  }
};

class Pipeline {
 public:
  Pipeline(const ExperimentConfig& cfg, std::ostream* log) : cfg_(cfg), log_(log) {}

  Artifacts run(const std::string& command) {
    art_.summary["command"] = command;
    art_.summary["config"] = Json::parse(canonical_text(cfg_));
    art_.summary["results"] = Json::array();
    if (command == "sample") sample();
    if (command == "resistance") resistance();
    if (command == "heatkernel") heatkernel();
    if (command == "delta") delta_only();
    if (command == "spectral") spectral_only();
    if (command == "exit") exit_only();
    if (command == "tails") tails_only(false);
    if (command == "goodradius") tails_only(true);
    if (command == "chainck") chainck();
    if (command == "full-pipeline") full();
    flush();
    art_.summary["discard_rates"] = art_.discard_rates;
    art_.summary["status"] = {{"code", art_.status}, {"problems", art_.problems}};
    return std::move(art_);
  }

 private:
  void note(const std::string& msg) {
    if (log_) *log_ << "[lrp] " << msg << "\n" << std::flush;
  }

  std::ostringstream& csv(const std::string& name, const std::string& header) {
    auto [it, fresh] = csv_.try_emplace(name);
    if (fresh) {
      order_.push_back(name);
      it->second << header << "\n";
    }
    return it->second;
  }

  void flush() {
    for (const auto& name : order_) art_.files.emplace_back(name, csv_[name].str());
  }

  WindowPolicy policy() const {
    return {cfg_.window.initial_half_width, cfg_.window.max_half_width, cfg_.window.multiplier};
  }

  SpectralOptions spectral_options() const {
    SpectralOptions o;
    o.multiplier = cfg_.window.multiplier;
    o.max_half_width = cfg_.window.max_half_width;
    o.leak_tolerance = cfg_.leak_tolerance;
    o.max_discard_rate = cfg_.max_discard_rate;
    o.long_edges = cfg_.long_edges;
    return o;
  }

  LambdaBackend lambda_backend() const {
    const bool fast = cfg_.fast;
    return [fast](double b, std::int64_t n, std::int64_t reps, std::uint64_t s) {
      return lambda_hat(b, n, reps, s, {.fast = fast});
    };
  }

  // ---- sample ----
  void sample() {
    const Vertex w = cfg_.window.initial_half_width;
    for (std::size_t bi = 0; bi < cfg_.beta.size(); ++bi) {
      const double beta = cfg_.beta[bi];
      const std::uint64_t bs = beta_seed(cfg_.seed, beta);
      note("sample beta=" + num(beta));
      double edges = 0.0;
      for (std::int64_t k = 0; k < cfg_.replicates; ++k) {
        const std::uint64_t s = derive_key(bs, {kSampleTag, static_cast<std::uint64_t>(k)});
        const Environment env = cfg_.long_edges ? sample_environment({beta, -w, w}, s) : Environment::pure_path(-w, w);
        std::ostringstream body;
        write_environment(body, env);
        art_.files.emplace_back("env_b" + std::to_string(bi) + "_r" + std::to_string(k) + ".txt", body.str());
        double deg = 0.0;
        for (Vertex x = env.lo(); x < env.hi(); ++x) deg += env.full_degree(x);
        deg /= static_cast<double>(env.size());
        edges += static_cast<double>(env.long_edges().size());
        csv("sample.csv", "beta,replicate,seed,lo,hi,long_edges,mean_degree,expected_mean_degree")
            << num(beta) << ',' << k << ',' << s << ',' << env.lo() << ',' << env.hi() << ','
            << env.long_edges().size() << ',' << num(deg) << ',' << num(cfg_.long_edges ? mean_degree(beta) : 2.0)
            << "\n";
      }
      art_.summary["results"].push_back({{"beta", beta},
                                         {"replicates", cfg_.replicates},
                                         {"mean_long_edges", edges / static_cast<double>(cfg_.replicates)},
                                         {"expected_mean_degree", mean_degree(beta)}});
    }
  }

  // ---- resistance / delta ----
  void lambda_rows(double beta, const LambdaEstimate& est) {
    csv("lambda.csv", "beta,n,lambda_hat,se,max_i,max_j,endpoint_mean,endpoint_se,endpoint_argmax_fraction,tied_pairs")
        << num(beta) << ',' << est.n << ',' << num(est.value) << ',' << num(est.standard_error) << ','
        << est.max_pair.i << ',' << est.max_pair.j << ',' << num(est.endpoint_pair.mean) << ','
        << num(est.endpoint_pair.standard_error) << ',' << num(est.endpoint_argmax_fraction) << ','
        << est.tied_pairs.size() << "\n";
  }

  static Json lambda_json(const LambdaEstimate& est) {
    Json tied = Json::array();
    for (const auto& p : est.tied_pairs) tied.push_back({p.i, p.j, jnum(p.mean)});
    return {{"n", est.n},
            {"lambda_hat", jnum(est.value)},
            {"se", jnum(est.standard_error)},
            {"max_pair", {est.max_pair.i, est.max_pair.j}},
            {"tied_pairs", tied},
            {"endpoint_mean", jnum(est.endpoint_pair.mean)},
            {"endpoint_argmax_fraction", jnum(est.endpoint_argmax_fraction)},
            {"fast_mode", est.fast_mode}};
  }

  void resistance() {
    for (double beta : cfg_.beta) {
      const std::uint64_t bs = beta_seed(cfg_.seed, beta);
      Json per_n = Json::array();
      for (auto n : cfg_.n) {
        note("resistance beta=" + num(beta) + " n=" + std::to_string(n));
        const LambdaEstimate est = lambda_hat(beta, n, cfg_.replicates, bs, {.fast = cfg_.fast});
        lambda_rows(beta, est);
        per_n.push_back(lambda_json(est));
      }
      art_.summary["results"].push_back({{"beta", beta}, {"lambda", per_n}});
    }
  }

  DeltaEstimate delta_for(double beta) {
    note("delta beta=" + num(beta));
    DeltaEstimate d = estimate_delta(beta, cfg_.n, cfg_.replicates, beta_seed(cfg_.seed, beta), lambda_backend());
    for (const auto& est : d.lambdas) lambda_rows(beta, est);
    return d;
  }

  Json delta_json(const DeltaEstimate& d) {
    Json lambdas = Json::array();
    for (const auto& est : d.lambdas) lambdas.push_back(lambda_json(est));
    Json moments = Json::array();
    for (int order : {1, 2}) {
      const MomentDiagnostic m = moment_diagnostic(d.lambdas, order);
      moments.push_back({{"order", order}, {"ratio", m.ratio}, {"fit", fit_json(m.fit)}});
    }
    return {{"delta_hat", jnum(d.scaling.delta)},
            {"half_width", jnum(d.fit.half_width)},
            {"fit", fit_json(d.fit)},
            {"predicted_spectral_dimension", jnum(2.0 / (1.0 + d.scaling.delta))},
            {"predicted_exit_exponent", jnum(d.scaling.exit_exponent())},
            {"lambda", lambdas},
            {"moment_diagnostics", moments}};
  }

  void delta_only() {
    for (double beta : cfg_.beta) {
      Json j = delta_json(delta_for(beta));
      j["beta"] = beta;
      art_.summary["results"].push_back(j);
    }
  }

  // ---- heat kernel ----
  void heatkernel() {
    const SpectralOptions opts = spectral_options();
    std::vector<HeatKernelTrace> all;
    for (double beta : cfg_.beta) {
      note("heatkernel beta=" + num(beta));
      const std::uint64_t bs = beta_seed(cfg_.seed, beta);
      const TraceBackend backend = window_trace_backend(beta, derive_key(bs, {kSpectralTag}), opts);
      auto traces = parallel_map(cfg_.environments, [&](std::int64_t e) { return backend(e, cfg_.steps); });
      std::int64_t discarded = 0;
      double max_leak = 0.0, mean_leak = 0.0, mass_error = 0.0;
      for (const auto& t : traces) {
        discarded += t.valid ? 0 : 1;
        max_leak = std::max(max_leak, t.total_leak());
        mean_leak += t.total_leak();
        mass_error = std::max(mass_error, t.mass_error);
      }
      const double rate = static_cast<double>(discarded) / static_cast<double>(cfg_.environments);
      art_.discard_rates["heatkernel beta=" + num(beta)] = rate;
      Json j{{"beta", beta},
             {"environments", cfg_.environments},
             {"half_width", spectral_half_width(cfg_.steps, opts)},
             {"discarded", discarded},
             {"discard_rate", rate},
             {"mean_leak", mean_leak / static_cast<double>(cfg_.environments)},
             {"max_leak", max_leak},
             {"max_mass_error", mass_error}};
      if (rate > cfg_.max_discard_rate) {
        art_.fail(3, "heatkernel beta=" + num(beta) + ": discard rate " + num(rate) + " above limit");
      }
      if (cfg_.walkers > 0) j["walk"] = walk_check(beta, bs, traces);
      art_.summary["results"].push_back(j);
      for (auto& t : traces) all.push_back(std::move(t));
    }
    std::ostringstream body;
    write_trace_csv(body, all);
    art_.files.emplace_back("heatkernel.csv", body.str());
  }

  Json walk_check(double beta, std::uint64_t bs, const std::vector<HeatKernelTrace>& traces) {
    WalkOptions w;
    w.steps = cfg_.steps;
    w.walkers = cfg_.walkers;
    w.seed = derive_key(bs, {kWalkTag});
    for (std::int64_t t = 2; t <= cfg_.steps; t *= 2) w.record_times.push_back(t);
    const WalkStats stats = mc_walk_annealed(beta, derive_key(bs, {kWalkTag, 1}), w, cfg_.long_edges);
    std::ostringstream body;
    write_walk_csv(body, stats);
    art_.files.emplace_back("walk_beta" + num(beta) + ".csv", body.str());
    // Monte Carlo return frequency against the exact annealed mean of p_t * deg(0)
    Json rows = Json::array();
    for (const auto& rec : stats.records) {
      double exact = 0.0;
      for (const auto& t : traces) exact += t.p[static_cast<std::size_t>(rec.time)] * t.source_degree;
      exact /= static_cast<double>(traces.size());
      rows.push_back({{"t", rec.time}, {"mc", rec.return_frequency}, {"mc_se", rec.return_se}, {"exact", exact}});
    }
    return rows;
  }

  // ---- spectral ----
  struct SpectralOut {
    std::optional<SpectralResult> annealed;
    std::vector<SpectralResult> quenched;
  };

  void spectral_rows(double beta, const std::string& kind, std::int64_t env, const SpectralResult& r) {
    for (std::size_t i = 0; i < r.n.size(); ++i) {
      csv("spectral.csv", "beta,kind,env,n,mean_p2n,se,fit_line")
          << num(beta) << ',' << kind << ',' << env << ',' << r.n[i] << ',' << num(r.mean_p2n[i]) << ','
          << num(r.se[i]) << ',' << num(r.fit.predict(static_cast<double>(r.n[i]))) << "\n";
    }
  }

  static Json spectral_json(const SpectralResult& r) {
    return {{"d_s", jnum(r.d_s)},
            {"slope", jnum(r.fit.slope)},
            {"half_width", jnum(r.fit.half_width)},
            {"fit", fit_json(r.fit)},
            {"environments", r.environments},
            {"discarded", r.discarded},
            {"discard_rate", r.discard_rate},
            {"mean_leak", jnum(r.mean_leak)},
            {"max_leak", jnum(r.max_leak)},
            {"valid", r.valid}};
  }

  SpectralOut spectral_for(double beta) {
    SpectralOut out;
    const SpectralOptions opts = spectral_options();
    const std::uint64_t bs = beta_seed(cfg_.seed, beta);
    if (cfg_.environments >= 2) {
      note("spectral annealed beta=" + num(beta));
      out.annealed = spectral_dimension_annealed(beta, cfg_.spectral_n, cfg_.environments, bs, opts,
                                                 window_trace_backend(beta, derive_key(bs, {kSpectralTag}), opts));
      spectral_rows(beta, "annealed", -1, *out.annealed);
      art_.discard_rates["spectral beta=" + num(beta)] = out.annealed->discard_rate;
      if (!out.annealed->valid) {
        art_.fail(3, "spectral beta=" + num(beta) + ": discard rate " + num(out.annealed->discard_rate) +
                         " above limit");
      }
    }
    const TraceBackend frozen = window_trace_backend(beta, derive_key(bs, {kQuenchedTag}), opts);
    for (std::int64_t q = 0; q < cfg_.quenched; ++q) {
      note("spectral quenched beta=" + num(beta) + " env=" + std::to_string(q));
      const HeatKernelTrace t = frozen(q, 2 * cfg_.spectral_n.back());
      out.quenched.push_back(spectral_dimension_quenched(t, cfg_.spectral_n, opts));
      spectral_rows(beta, "quenched", q, out.quenched.back());
      if (!out.quenched.back().valid) {
        art_.fail(3, "spectral beta=" + num(beta) + ": frozen environment " + std::to_string(q) + " leaked " +
                         num(t.total_leak()));
      }
    }
    return out;
  }

  Json spectral_out_json(const SpectralOut& s) {
    Json j;
    if (s.annealed) j["annealed"] = spectral_json(*s.annealed);
    Json q = Json::array();
    for (const auto& r : s.quenched) q.push_back(spectral_json(r));
    j["quenched"] = q;
    return j;
  }

  void spectral_only() {
    for (double beta : cfg_.beta) {
      Json j = spectral_out_json(spectral_for(beta));
      j["beta"] = beta;
      art_.summary["results"].push_back(j);
    }
  }

  // ---- exit ----
  Json exit_for(double beta, std::optional<double> delta) {
    note("exit beta=" + num(beta));
    const ExitScalingOptions opts{policy(), cfg_.long_edges, cfg_.max_discard_rate};
    const ExitScaling e = exit_time_exponent(beta, cfg_.r, cfg_.exit_replicates,
                                             derive_key(beta_seed(cfg_.seed, beta), {kExitTag}), opts);
    for (std::size_t i = 0; i < e.r.size(); ++i) {
      const double line = e.fit.log_x.empty() ? std::nan("") : e.fit.predict(e.r[i]);
      csv("exit.csv", "beta,r,mean,se,used,discarded,fit_line")
          << num(beta) << ',' << num(e.r[i]) << ',' << num(e.mean[i]) << ',' << num(e.se[i]) << ',' << e.used[i]
          << ',' << e.discarded[i] << ',' << num(line) << "\n";
    }
    art_.discard_rates["exit beta=" + num(beta)] = e.max_discard_rate;
    if (!e.valid) art_.fail(3, "exit beta=" + num(beta) + ": discard rate " + num(e.max_discard_rate) + " above limit");
    Json j{{"slope", jnum(e.fit.slope)},
           {"half_width", jnum(e.fit.half_width)},
           {"fit", fit_json(e.fit)},
           {"max_discard_rate", e.max_discard_rate},
           {"discarded", e.discarded},
           {"valid", e.valid}};
    if (delta) j["predicted"] = jnum((1.0 + *delta) / *delta);
    return j;
  }

  void exit_only() {
    for (double beta : cfg_.beta) {
      Json j = exit_for(beta, std::nullopt);
      j["beta"] = beta;
      art_.summary["results"].push_back(j);
    }
  }

  // ---- tails / good radius ----
  Json tails_for(double beta, double delta, bool good_radius_only) {
    const std::uint64_t bs = beta_seed(cfg_.seed, beta);
    note("tails beta=" + num(beta) + " r=" + num(cfg_.tail_r));
    WindowPolicy pol = policy();
    const auto samples = sample_balls(beta, cfg_.tail_r, cfg_.tail_replicates, derive_key(bs, {kBallTag}), pol);
    ScalingFunctions sc{.delta = delta};
    sc.volume_scale = cfg_.volume_scale ? *cfg_.volume_scale : calibrate_volume_scale(samples, cfg_.tail_r, delta);
    Json j{{"delta", delta}, {"volume_scale", sc.volume_scale}, {"r", cfg_.tail_r}};
    std::int64_t flagged = 0;
    for (const auto& s : samples) flagged += s.flagged ? 1 : 0;
    const double rate = static_cast<double>(flagged) / static_cast<double>(samples.size());
    j["discard_rate"] = rate;
    art_.discard_rates["tails beta=" + num(beta)] = rate;
    if (rate > cfg_.max_discard_rate) art_.fail(3, "tails beta=" + num(beta) + ": discard rate " + num(rate) + " above limit");

    std::vector<TailTag> tags{TailTag::good_radius};
    if (!good_radius_only) tags = {TailTag::volume_low, TailTag::volume_high, TailTag::resistance_low, TailTag::good_radius};
    Json curves = Json::object();
    for (auto tag : tags) {
      const TailCurve c = tail_curve(tag, samples, cfg_.tail_r, cfg_.lambda, sc);
      for (std::size_t i = 0; i < c.lambda.size(); ++i) {
        csv("tails.csv", "beta,tag,r,lambda,probability,wilson_lo,wilson_hi,hits,complement_hits,used")
            << num(beta) << ',' << to_string(tag) << ',' << num(c.r) << ',' << num(c.lambda[i]) << ','
            << num(c.probability[i]) << ',' << num(c.wilson_lo[i]) << ',' << num(c.wilson_hi[i]) << ',' << c.hits[i]
            << ',' << c.complement_hits[i] << ',' << c.used << "\n";
      }
      Json cj{{"slope", jnum(c.slope)},
              {"positive_points", c.positive_points},
              {"monotone_within_ci", c.monotone_within_ci()},
              {"probability", c.probability}};
      if (tag == TailTag::volume_low) {
        // the complement is counted independently: V > phi(r) / lambda
        bool ok = true;
        for (std::size_t i = 0; i < c.lambda.size(); ++i) {
          std::int64_t above = 0;
          for (const auto& s : samples) {
            if (!s.flagged && s.volume > sc.phi(cfg_.tail_r) / c.lambda[i]) ++above;
          }
          ok = ok && above + c.hits[i] == c.used;
        }
        cj["complementarity"] = ok;
        if (!ok) art_.fail(1, "tails: V-low and its complement do not partition the samples");
      }
      curves[to_string(tag)] = cj;
    }
    j["curves"] = curves;

    Json freq = Json::array();
    for (double lambda : cfg_.lambda) {
      const GoodRadius g = good_radius_frequency(samples, cfg_.tail_r, lambda, sc);
      csv("goodradius.csv", "beta,r,lambda,frequency,one_minus,wilson_lo,wilson_hi,used,discarded")
          << num(beta) << ',' << num(cfg_.tail_r) << ',' << num(lambda) << ',' << num(g.frequency) << ','
          << num(1.0 - g.frequency) << ',' << num(g.wilson_lo) << ',' << num(g.wilson_hi) << ',' << g.used << ','
          << g.discarded << "\n";
      freq.push_back({{"lambda", lambda}, {"frequency", g.frequency}});
    }
    j["good_radius"] = freq;

    if (!good_radius_only && cfg_.r.size() >= 2) {
      std::vector<std::vector<BallSample>> per_r;
      for (double r : cfg_.r) {
        note("inverse volume beta=" + num(beta) + " r=" + num(r));
        per_r.push_back(sample_balls(beta, r, cfg_.tail_replicates,
                                     derive_key(bs, {kBallTag, std::bit_cast<std::uint64_t>(r)}), pol));
      }
      const InverseVolumeDiagnostic d = inverse_volume_diagnostic(cfg_.r, per_r, delta);
      for (std::size_t i = 0; i < d.r.size(); ++i) {
        csv("inverse_volume.csv", "beta,r,scaled_mean") << num(beta) << ',' << num(d.r[i]) << ',' << num(d.scaled_mean[i]) << "\n";
      }
      j["inverse_volume"] = {{"scaled_mean", d.scaled_mean}, {"fit", fit_json(d.fit)}};
    }
    return j;
  }

  void tails_only(bool good_radius_only) {
    for (double beta : cfg_.beta) {
      Json j;
      double delta = 0.0;
      if (cfg_.delta) {
        delta = *cfg_.delta;
      } else {
        const DeltaEstimate d = delta_for(beta);
        delta = d.scaling.delta;
        j["delta_estimate"] = delta_json(d);
      }
      j["tails"] = tails_for(beta, delta, good_radius_only);
      j["beta"] = beta;
      art_.summary["results"].push_back(j);
    }
  }

  // ---- chaining ----
  void chainck() {
    for (double beta : cfg_.beta) {
      const std::uint64_t bs = beta_seed(cfg_.seed, beta);
      double min_slack = std::numeric_limits<double>::infinity();
      std::int64_t failures = 0;
      for (auto n : cfg_.n) {
        note("chainck beta=" + num(beta) + " n=" + std::to_string(n));
        const auto reports = parallel_map(cfg_.draws, [&](std::int64_t d) {
          const auto key = derive_key(bs, {kChainTag, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(d)});
          const Environment env = cfg_.long_edges ? sample_environment({beta, 0, std::max<Vertex>(n, 2)}, key)
                                                  : Environment::pure_path(0, std::max<Vertex>(n, 2));
          auto rng = CounterRng::stream(key, {kChainTag});
          return dyadic_chain_check(env, n, static_cast<Vertex>(rng.below(static_cast<std::uint64_t>(n))));
        });
        for (std::size_t d = 0; d < reports.size(); ++d) {
          const auto& r = reports[d];
          csv("chain.csv", "beta,n,draw,x,resistance,chain_sum,bound,slack")
              << num(beta) << ',' << n << ',' << d << ',' << r.x << ',' << num(r.resistance) << ','
              << num(r.chain_sum) << ',' << num(r.bound) << ',' << num(r.slack) << "\n";
          min_slack = std::min(min_slack, r.slack);
          if (r.slack < -1e-8) ++failures;
        }
      }
      if (failures > 0) {
        art_.fail(1, "chainck beta=" + num(beta) + ": " + std::to_string(failures) + " draws break the chaining bound");
      }
      art_.summary["results"].push_back({{"beta", beta}, {"min_slack", jnum(min_slack)}, {"failures", failures}});
    }
  }

  // ---- everything ----
  void full() {
    bool consistent = true;
    for (double beta : cfg_.beta) {
      Json j{{"beta", beta}};
      const DeltaEstimate d = delta_for(beta);
      const double delta = d.scaling.delta;
      j["delta"] = delta_json(d);
      const SpectralOut s = spectral_for(beta);
      j["spectral"] = spectral_out_json(s);
      const double predicted = 2.0 / (1.0 + delta);
      Json check{{"predicted_d_s", predicted}, {"tolerance", cfg_.consistency_tolerance}};
      auto judge = [&](const SpectralResult& r) {
        const double dev = std::abs(r.d_s - predicted);
        const bool ok = std::isfinite(dev) && dev <= cfg_.consistency_tolerance;
        return Json{{"d_s", jnum(r.d_s)}, {"deviation", jnum(dev)}, {"ok", ok}};
      };
      bool ok = true;
      if (s.annealed) {
        check["annealed"] = judge(*s.annealed);
        ok = ok && check["annealed"]["ok"].get<bool>();
      }
      Json q = Json::array();
      for (const auto& r : s.quenched) {
        q.push_back(judge(r));
        ok = ok && q.back()["ok"].get<bool>();
      }
      check["quenched"] = q;
      check["ok"] = ok;
      j["consistency"] = check;
      if (!ok) {
        consistent = false;
        art_.fail(1, "full-pipeline beta=" + num(beta) + ": spectral dimension disagrees with 2/(1+delta)");
      }
      if (!cfg_.r.empty()) j["exit"] = exit_for(beta, delta);
      if (cfg_.tail_r > 0.0) j["tails"] = tails_for(beta, delta, false);
      art_.summary["results"].push_back(j);
    }
    art_.summary["consistent"] = consistent;
  }

  const ExperimentConfig& cfg_;
  std::ostream* log_;
  Artifacts art_;
  std::map<std::string, std::ostringstream> csv_;
  std::vector<std::string> order_;
};

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << body;
  out.flush();
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

fs::path unique_temp(const fs::path& dir, const std::string& stem) {
  static std::atomic<int> counter{0};
  return dir / (stem + ".tmp" + std::to_string(::getpid()) + "." + std::to_string(counter++));
}

std::optional<std::string> recorded_hash(const fs::path& outdir) {
  const fs::path rec = outdir / "record.json";
  if (!fs::exists(rec)) return std::nullopt;
  try {
    return Json::parse(slurp(rec)).at("config_hash").get<std::string>();
  } catch (const std::exception&) {
    return std::string("unreadable");
  }
}

// Copies a complete cache entry into the output directory.
void publish(const fs::path& entry, const fs::path& outdir) {
  if (fs::exists(outdir)) fs::remove_all(outdir);
  const fs::path tmp = unique_temp(outdir.parent_path(), "." + outdir.filename().string());
  fs::create_directories(tmp);
  for (const auto& f : fs::directory_iterator(entry)) {
    if (f.path().filename() == "config.json") continue;
    fs::copy_file(f.path(), tmp / f.path().filename());
  }
  fs::rename(tmp, outdir);
}

int exit_code_from_summary(const fs::path& entry) {
  try {
    return Json::parse(slurp(entry / "summary.json")).at("status").at("code").get<int>();
  } catch (const std::exception&) {
    return 1;
  }
}

RunOutcome run_checked(const std::string& command, ExperimentConfig cfg, const RunOptions& options) {
  if (!cfg.command.empty() && cfg.command != command) validate(cfg, command);  // names the mismatch
  cfg.command = command;
  validate(cfg, command);
  if (options.threads < 0) throw ConfigError("--threads: must be positive");
  if (options.threads > 0) set_default_threads(options.threads);

  const fs::path out_root = options.out ? *options.out : fs::path(cfg.out);
  fs::path cache_root = out_root / ".cache";
  if (const char* env = std::getenv("LRP_CACHE_DIR"); env && *env) cache_root = env;
  if (options.cache_dir) cache_root = *options.cache_dir;
  fs::create_directories(out_root);
  fs::create_directories(cache_root);

  RunOutcome outcome;
  outcome.output_dir = out_root / command;
  const std::string hash = config_hash(cfg);
  const std::string canonical = canonical_text(cfg);
  const fs::path entry = cache_root / hash;

  if (!options.force) {
    const auto existing = recorded_hash(outcome.output_dir);
    if (existing && *existing != hash) {
      throw ConfigError("cache conflict: " + outcome.output_dir.string() + " holds results for config " + *existing +
                        "; rerun with --force to replace them");
    }
    if (!existing && fs::exists(outcome.output_dir) && !fs::is_empty(outcome.output_dir)) {
      throw ConfigError("cache conflict: " + outcome.output_dir.string() +
                        " exists and is not an lrp output directory; rerun with --force");
    }
  }

  if (!options.force && fs::exists(entry / "record.json")) {
    if (slurp(entry / "config.json") != canonical) {
      throw ConfigError("cache conflict: entry " + entry.string() + " belongs to a different config; rerun with --force");
    }
    publish(entry, outcome.output_dir);
    outcome.cache_hit = true;
    outcome.exit_code = exit_code_from_summary(entry);
    outcome.message = "cache hit " + hash;
    return outcome;
  }

  const std::string started = now_utc();
  Pipeline pipeline(cfg, options.log);
  Artifacts art = pipeline.run(command);

  const fs::path tmp = unique_temp(cache_root, hash);
  fs::create_directories(tmp);
  Json outputs = Json::array();
  for (const auto& [name, body] : art.files) {
    write_file(tmp / name, body);
    outputs.push_back(name);
  }
  write_file(tmp / "summary.json", art.summary.dump(2) + "\n");
  write_file(tmp / "config.json", canonical);
  Json beta_seeds = Json::object();
  for (double b : cfg.beta) beta_seeds[num(b)] = beta_seed(cfg.seed, b);
  const Json record{{"config_hash", hash},
                    {"command", command},
                    {"version", artifact_version()},
                    {"started", started},
                    {"finished", now_utc()},
                    {"outputs", outputs},
                    {"summary", "summary.json"},
                    {"status", art.summary["status"]},
                    {"discard_rates", art.discard_rates},
                    {"rng",
                     {{"generator", "counter-based splitmix64"},
                      {"base_seed", cfg.seed},
                      {"beta_seeds", beta_seeds},
                      {"task_streams", "derive_key(beta_seed, {tag, task index})"}}},
                    {"threads", default_threads()}};
  // record.json goes in last: an entry without it is never read back
  write_file(tmp / "record.json", record.dump(2) + "\n");
  if (fs::exists(entry)) fs::remove_all(entry);
  fs::rename(tmp, entry);
  publish(entry, outcome.output_dir);

  outcome.exit_code = art.status;
  outcome.message = art.problems.empty() ? "ok " + hash : art.problems.front();
  return outcome;
}

}  // namespace

RunOutcome run(const std::string& command, ExperimentConfig cfg, const RunOptions& options) {
  RunOutcome failed;
  try {
    return run_checked(command, std::move(cfg), options);
  } catch (const ConfigError& e) {
    failed = {2, false, {}, e.what()};
  } catch (const DomainError& e) {
    failed = {2, false, {}, e.what()};
  } catch (const NumericValidityError& e) {
    failed = {3, false, {}, e.what()};
  } catch (const InvariantViolation& e) {
    failed = {1, false, {}, e.what()};
  } catch (const std::exception& e) {
    failed = {1, false, {}, e.what()};
  }
  return failed;
}

RunOutcome run(const std::string& command, const fs::path& config_path, const RunOptions& options) {
  try {
    return run(command, load_config(config_path), options);
  } catch (const ConfigError& e) {
    return {2, false, {}, e.what()};
  }
}

}  // namespace lrp::cli
