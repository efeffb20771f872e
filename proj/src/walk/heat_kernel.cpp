#include <Eigen/Core>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

#include "lrp/errors.hpp"
#include "lrp/walk.hpp"

namespace lrp {

namespace {

// Far-away mass decays through the subnormal range, which is very slow on
// x86; flushing it to zero changes nothing at the 1e-300 level.
class FlushDenormals {
 public:
  FlushDenormals() {
#if defined(__SSE2__)
    saved_ = _mm_getcsr();
    _mm_setcsr(saved_ | 0x8040);  // FTZ | DAZ
#endif
  }
  ~FlushDenormals() {
#if defined(__SSE2__)
    _mm_setcsr(saved_);
#endif
  }
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;

 private:
  unsigned saved_ = 0;
};

}  // namespace

HeatKernelTrace evolve_heat_kernel(const Environment& env, Vertex source, std::int64_t n_max,
                                   const HeatKernelOptions& options) {
  if (!env.contains(source)) throw DomainError("source " + std::to_string(source) + " outside the window");
  if (n_max < 0) throw DomainError("n_max must be >= 0");
  FlushDenormals guard;

  const std::int64_t n = env.size();
  const Vertex lo = env.lo();
  std::vector<double> inv_degree(static_cast<std::size_t>(n));
  std::vector<double> outside(static_cast<std::size_t>(n));
  // Long edges as window-index pairs, plus the reach of each vertex so the
  // support interval can be advanced cheaply.
  std::vector<std::pair<std::int32_t, std::int32_t>> edges;
  edges.reserve(env.long_edges().size());
  std::vector<std::int64_t> reach_lo(static_cast<std::size_t>(n)), reach_hi(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    inv_degree[k] = 1.0 / env.full_degree(lo + i);
    outside[k] = env.outside_degree(lo + i);
    reach_lo[k] = std::max<std::int64_t>(i - 1, 0);
    reach_hi[k] = std::min<std::int64_t>(i + 1, n - 1);
    for (Vertex y : env.long_neighbors(lo + i)) {
      if (y - lo > i) edges.emplace_back(static_cast<std::int32_t>(i), static_cast<std::int32_t>(y - lo));
      reach_lo[k] = std::min<std::int64_t>(reach_lo[k], y - lo);
      reach_hi[k] = std::max<std::int64_t>(reach_hi[k], y - lo);
    }
  }

  HeatKernelTrace trace;
  trace.beta = env.beta();
  trace.seed = env.seed();
  trace.window_lo = env.lo();
  trace.window_hi = env.hi();
  trace.source = source;
  trace.source_degree = env.full_degree(source);
  trace.p.reserve(static_cast<std::size_t>(n_max) + 1);
  trace.leak.reserve(static_cast<std::size_t>(n_max) + 1);
  trace.off_parity.reserve(static_cast<std::size_t>(n_max) + 1);

  const std::int64_t s = source - lo;
  // v = mass, u = mass / deg (what each vertex sends along every edge)
  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  std::vector<double> u(static_cast<std::size_t>(n), 0.0);
  v[static_cast<std::size_t>(s)] = 1.0;
  std::int64_t first = s;
  std::int64_t last = s;
  double leak = 0.0;
  trace.p.push_back(inv_degree[static_cast<std::size_t>(s)]);
  trace.leak.push_back(0.0);
  trace.off_parity.push_back(0.0);

  for (std::int64_t step = 1; step <= n_max; ++step) {
    std::int64_t next_first = first;
    std::int64_t next_last = last;
    double leaked = 0.0;
    for (std::int64_t i = first; i <= last; ++i) {
      const auto k = static_cast<std::size_t>(i);
      u[k] = v[k] * inv_degree[k];
      leaked += u[k] * outside[k];
      if (v[k] != 0.0) {
        next_first = std::min(next_first, reach_lo[k]);
        next_last = std::max(next_last, reach_hi[k]);
      }
    }
    // u is zero outside [first, last]; keep it that way for the new cells
    for (std::int64_t i = next_first; i < first; ++i) u[static_cast<std::size_t>(i)] = 0.0;
    for (std::int64_t i = last + 1; i <= next_last; ++i) u[static_cast<std::size_t>(i)] = 0.0;
    leak += leaked;
    first = next_first;
    last = next_last;

    // path edges, then long edges (both ends zero-mass edges add nothing)
    for (std::int64_t i = first; i <= last; ++i) {
      const auto k = static_cast<std::size_t>(i);
      v[k] = (i > 0 ? u[k - 1] : 0.0) + (i + 1 < n ? u[k + 1] : 0.0);
    }
    for (const auto& [x, y] : edges) {
      v[static_cast<std::size_t>(x)] += u[static_cast<std::size_t>(y)];
      v[static_cast<std::size_t>(y)] += u[static_cast<std::size_t>(x)];
    }
    double total = 0.0;
    double off = 0.0;
    for (std::int64_t i = first; i <= last; ++i) {
      const double m = v[static_cast<std::size_t>(i)];
      total += m;
      if (((i - s - step) & 1) != 0) off += m;
    }
    trace.mass_error = std::max(trace.mass_error, std::abs(total - (1.0 - leak)));
    trace.p.push_back(v[static_cast<std::size_t>(s)] * inv_degree[static_cast<std::size_t>(s)]);
    trace.leak.push_back(leak);
    trace.off_parity.push_back(off);
  }
  trace.valid = leak <= options.leak_tolerance;
  if (options.keep_final_row) {
    trace.final_row.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
      trace.final_row[static_cast<std::size_t>(i)] =
          v[static_cast<std::size_t>(i)] * inv_degree[static_cast<std::size_t>(i)];
    }
  }
  return trace;
}

std::vector<double> dense_heat_kernel_row(const Environment& env, Vertex source, std::int64_t n) {
  if (env.size() > 2048) throw DomainError("dense oracle limited to windows of 2048 vertices");
  if (!env.contains(source)) throw DomainError("source outside the window");
  const auto size = static_cast<Eigen::Index>(env.size());
  Eigen::MatrixXd step = Eigen::MatrixXd::Zero(size, size);
  for (Vertex x = env.lo(); x < env.hi(); ++x) {
    const Eigen::Index i = x - env.lo();
    const double q = 1.0 / env.full_degree(x);
    if (x > env.lo()) step(i, i - 1) = q;
    if (x + 1 < env.hi()) step(i, i + 1) = q;
    for (Vertex y : env.long_neighbors(x)) step(i, y - env.lo()) = q;
  }
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(size);
  row(source - env.lo()) = 1.0;
  for (std::int64_t k = 0; k < n; ++k) row = row * step;
  std::vector<double> out(static_cast<std::size_t>(size));
  for (Eigen::Index i = 0; i < size; ++i) out[static_cast<std::size_t>(i)] = row(i) / env.full_degree(env.lo() + i);
  return out;
}

void write_trace_csv(std::ostream& out, const std::vector<HeatKernelTrace>& traces, bool header) {
  if (header) out << "beta,seed,W,n,p_nn,leak\n";
  char line[192];
  for (const auto& t : traces) {
    const Vertex half = (t.window_hi - t.window_lo) / 2;
    for (std::size_t k = 0; k < t.p.size(); ++k) {
      std::snprintf(line, sizeof line, "%.17g,%llu,%lld,%zu,%.17g,%.17g\n", t.beta,
                    static_cast<unsigned long long>(t.seed), static_cast<long long>(half), k, t.p[k],
                    t.leak[k]);
      out << line;
    }
  }
}

}  // namespace lrp
