#include <Eigen/SparseCholesky>
#include <algorithm>
#include <charconv>
#include <ostream>
#include <string>

#include "lrp/errors.hpp"
#include "lrp/resistance.hpp"

namespace lrp {

const char* to_string(QueryKind kind) noexcept {
  switch (kind) {
    case QueryKind::two_point_restricted: return "two_point_restricted";
    case QueryKind::two_point_windowed: return "two_point_windowed";
    case QueryKind::point_to_set: return "point_to_set";
  }
  return "unknown";
}

void write_query_csv(std::ostream& out, double beta, std::int64_t n, std::uint64_t seed,
                     std::span<const ResistanceQuery> queries, bool header) {
  if (header) out << "beta,n,seed,kind,i,j,value,boundary_flag\n";
  char buf[64];
  for (const auto& q : queries) {
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, q.value);
    out << beta << ',' << n << ',' << seed << ',' << to_string(q.kind) << ',' << q.i << ',' << q.j << ','
        << std::string_view(buf, static_cast<std::size_t>(p - buf)) << ',' << (q.boundary_flag ? 1 : 0) << '\n';
  }
}

ResistanceQuery two_point(const LinearSystem& sys, Vertex i, Vertex j) {
  ResistanceQuery q;
  q.kind = sys.spans_window() ? QueryKind::two_point_windowed : QueryKind::two_point_restricted;
  q.i = i;
  q.j = j;
  const auto a = sys.index_of(i);
  const auto b = sys.index_of(j);
  if (sys.spans_window()) {
    const auto n = sys.size();
    const auto margin = std::max<std::int64_t>(1, n / 16);
    auto near_end = [&](std::int64_t idx) { return idx < margin || idx >= n - margin; };
    q.boundary_flag = near_end(a) || near_end(b);
  }
  if (a == b) return q;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(sys.size());
  rhs[a] = 1.0;
  rhs[b] = -1.0;
  const Eigen::VectorXd x = sys.solve(rhs);
  q.value = std::max(0.0, x[a] - x[b]);
  return q;
}

ResistanceQuery point_to_set(const Environment& env, Vertex i, std::span<const Vertex> target,
                             const PointToSetOptions& options) {
  if (target.empty()) throw DomainError("point_to_set: target set is empty");
  if (!env.contains(i)) throw DomainError("vertex " + std::to_string(i) + " outside the window");
  const auto n = env.size();
  std::vector<char> in_target(static_cast<std::size_t>(n), 0);
  for (Vertex t : target) {
    if (!env.contains(t)) throw DomainError("target vertex " + std::to_string(t) + " outside the window");
    in_target[static_cast<std::size_t>(t - env.lo())] = 1;
  }
  if (in_target[static_cast<std::size_t>(i - env.lo())]) {
    throw DomainError("point_to_set: source " + std::to_string(i) + " lies in the target set");
  }

  // Free vertices get consecutive indices; the target supernode is grounded,
  // so edges into it only contribute to the diagonal.
  std::vector<int> index(static_cast<std::size_t>(n), -1);
  int m = 0;
  for (std::int64_t k = 0; k < n; ++k) {
    if (!in_target[static_cast<std::size_t>(k)]) index[static_cast<std::size_t>(k)] = m++;
  }
  // Column by column: free neighbours off the diagonal, all incident edges
  // (plus routed outside edges) on it.
  auto free_index = [&](Vertex y) { return index[static_cast<std::size_t>(y - env.lo())]; };
  SparseMatrix matrix(m, m);
  matrix.reserve(static_cast<Eigen::Index>(m) * 3 + 2 * static_cast<Eigen::Index>(env.long_edges().size()));
  bool leaks = false;
  for (Vertex x = env.lo(); x < env.hi(); ++x) {
    const int a = free_index(x);
    if (a < 0) continue;
    matrix.startVec(a);
    double diag = env.degree(x);
    if (env.outside_degree(x) > 0) {
      if (options.outside_edges_to_target) {
        diag += env.outside_degree(x);
      } else {
        leaks = true;
      }
    }
    const auto nb = env.long_neighbors(x);
    auto it = nb.begin();
    auto emit = [&](Vertex y) {
      const int b = free_index(y);
      if (b >= 0) matrix.insertBack(b, a) = -1.0;
    };
    for (; it != nb.end() && *it < x; ++it) emit(*it);
    if (x > env.lo()) emit(x - 1);
    matrix.insertBack(a, a) = diag;
    if (x + 1 < env.hi()) emit(x + 1);
    for (; it != nb.end(); ++it) emit(*it);
  }
  matrix.finalize();
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(matrix);
  if (ldlt.info() != Eigen::Success) {
    throw InvariantViolation("point_to_set: reduced Laplacian is not positive definite");
  }
  const int src = index[static_cast<std::size_t>(i - env.lo())];
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  rhs[src] = 1.0;
  const Eigen::VectorXd f = ldlt.solve(rhs);

  ResistanceQuery q;
  q.kind = QueryKind::point_to_set;
  q.i = i;
  q.j = i;
  q.value = f[src];
  // Without routing, current could still reach the target through Z-edges
  // that leave the window from a free vertex.
  q.boundary_flag = leaks;
  return q;
}

double ResistanceProfile::at(Vertex y) const {
  const auto it = std::lower_bound(vertices.begin(), vertices.end(), y);
  if (it == vertices.end() || *it != y) {
    throw DomainError("vertex " + std::to_string(y) + " not in the profile");
  }
  return values[static_cast<std::size_t>(it - vertices.begin())];
}

// Grounding at the source makes R(source, y) the y-th diagonal entry of the
// grounded inverse, which avoids the cancellation in G_ss + G_yy - 2 G_sy.
ResistanceProfile resistance_profile(const LinearSystem& sys, Vertex source) {
  sys.index_of(source);
  ResistanceProfile profile;
  profile.source = source;
  profile.vertices.assign(sys.vertices().begin(), sys.vertices().end());
  const LinearSystem grounded = sys.ground() == source ? sys : sys.regrounded(source);
  Eigen::VectorXd diag;
  if (grounded.solver() == SolverKind::direct) {
    diag = grounded.inverse_diagonal();
  } else if (grounded.size() <= 4096) {
    diag = grounded.inverse_diagonal_by_solves();
  } else {
    throw DomainError("resistance profile on more than 4096 vertices needs the direct solver");
  }
  profile.values.assign(diag.data(), diag.data() + diag.size());
  for (double& v : profile.values) v = std::max(v, 0.0);
  return profile;
}

}  // namespace lrp
