#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <mutex>
#include <numeric>
#include <string>

#include "lrp/errors.hpp"
#include "lrp/resistance.hpp"

namespace lrp {

using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;
using Cg = Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                                    Eigen::DiagonalPreconditioner<double>>;

struct LinearSystem::Factor {
  SolverKind kind = SolverKind::direct;
  SparseMatrix grounded;  // CG keeps a reference to this matrix
  Ldlt ldlt;
  Cg cg;
  mutable std::mutex cg_mutex;  // Eigen's CG records iteration counts on solve
};

namespace {

std::string vertex_text(Vertex v) { return std::to_string(v); }

}  // namespace

bool LinearSystem::contains(Vertex x) const noexcept {
  if (vertices_.empty()) return false;
  if (contiguous_) return x >= vertices_.front() && x <= vertices_.back();
  return std::binary_search(vertices_.begin(), vertices_.end(), x);
}

std::int64_t LinearSystem::index_of(Vertex x) const {
  if (!contains(x)) throw DomainError("vertex " + vertex_text(x) + " is not in the system");
  if (contiguous_) return x - vertices_.front();
  return std::lower_bound(vertices_.begin(), vertices_.end(), x) - vertices_.begin();
}

SolverKind LinearSystem::solver() const noexcept {
  return factor_ ? factor_->kind : SolverKind::direct;
}

LinearSystem LinearSystem::assemble(const Environment& env, SolverKind solver) {
  return assemble(env, env.lo(), env.hi(), solver);
}

LinearSystem LinearSystem::assemble(const Environment& env, Vertex lo, Vertex hi, SolverKind solver) {
  return assemble_interval(env, lo, hi, hi - 1, solver);
}

LinearSystem LinearSystem::assemble_grounded(const Environment& env, Vertex ground, SolverKind solver) {
  if (!env.contains(ground)) throw DomainError("ground " + vertex_text(ground) + " outside the window");
  return assemble_interval(env, env.lo(), env.hi(), ground, solver);
}

// Column-compressed fill straight from the sorted adjacency lists; windows
// reach millions of vertices so the triplet route's copies are avoided.
LinearSystem LinearSystem::assemble_interval(const Environment& env, Vertex lo, Vertex hi,
                                             Vertex ground, SolverKind solver) {
  if (lo >= hi || lo < env.lo() || hi > env.hi()) {
    throw DomainError("interval [" + vertex_text(lo) + ", " + vertex_text(hi) +
                      ") is not a non-empty subset of the window");
  }
  LinearSystem sys;
  sys.vertices_.resize(static_cast<std::size_t>(hi - lo));
  std::iota(sys.vertices_.begin(), sys.vertices_.end(), lo);
  sys.contiguous_ = true;
  sys.spans_window_ = (lo == env.lo() && hi == env.hi());
  sys.ground_ = ground - lo;

  const auto n = static_cast<int>(sys.size());
  std::vector<int> outer(static_cast<std::size_t>(n) + 1, 0);
  for (Vertex x = lo; x < hi; ++x) {
    int count = 1 + (x > lo ? 1 : 0) + (x + 1 < hi ? 1 : 0);
    for (Vertex y : env.long_neighbors(x)) count += (y >= lo && y < hi) ? 1 : 0;
    outer[static_cast<std::size_t>(x - lo) + 1] = count;
  }
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) outer[i + 1] += outer[i];
  SparseMatrix& lap = sys.laplacian_;
  lap.resize(n, n);
  lap.resizeNonZeros(outer.back());
  std::copy(outer.begin(), outer.end(), lap.outerIndexPtr());
  int* inner = lap.innerIndexPtr();
  double* val = lap.valuePtr();
  for (Vertex x = lo; x < hi; ++x) {
    int p = outer[static_cast<std::size_t>(x - lo)];
    const int diag_slot_count = outer[static_cast<std::size_t>(x - lo) + 1] - p - 1;
    auto put = [&](Vertex y, double v) {
      inner[p] = static_cast<int>(y - lo);
      val[p] = v;
      ++p;
    };
    const auto nb = env.long_neighbors(x);
    auto it = nb.begin();
    for (; it != nb.end() && *it < x; ++it) {
      if (*it >= lo) put(*it, -1.0);
    }
    if (x > lo) put(x - 1, -1.0);
    put(x, static_cast<double>(diag_slot_count));
    if (x + 1 < hi) put(x + 1, -1.0);
    for (; it != nb.end(); ++it) {
      if (*it < hi) put(*it, -1.0);
    }
  }
  sys.factorize(solver);
  return sys;
}

LinearSystem LinearSystem::assemble(const Environment& env, std::vector<Vertex> vertices,
                                    SolverKind solver) {
  if (vertices.empty()) throw DomainError("vertex set is empty");
  std::sort(vertices.begin(), vertices.end());
  vertices.erase(std::unique(vertices.begin(), vertices.end()), vertices.end());
  for (Vertex v : vertices) {
    if (!env.contains(v)) throw DomainError("vertex " + vertex_text(v) + " outside the window");
  }
  LinearSystem sys;
  sys.vertices_ = std::move(vertices);
  sys.contiguous_ = (sys.vertices_.back() - sys.vertices_.front() + 1 == sys.size());
  sys.spans_window_ = sys.contiguous_ && sys.vertices_.front() == env.lo() &&
                      sys.vertices_.back() == env.hi() - 1;
  sys.ground_ = sys.size() - 1;

  const auto n = static_cast<int>(sys.size());
  std::vector<Eigen::Triplet<double, int>> triplets;
  std::vector<double> diag(static_cast<std::size_t>(n), 0.0);
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[static_cast<std::size_t>(a)] != a) {
      parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
      a = parent[static_cast<std::size_t>(a)];
    }
    return a;
  };
  auto link = [&](int a, int b) {
    triplets.emplace_back(a, b, -1.0);
    triplets.emplace_back(b, a, -1.0);
    diag[static_cast<std::size_t>(a)] += 1.0;
    diag[static_cast<std::size_t>(b)] += 1.0;
    parent[static_cast<std::size_t>(find(a))] = find(b);
  };
  for (int ix = 0; ix < n; ++ix) {
    const Vertex x = sys.vertices_[static_cast<std::size_t>(ix)];
    if (sys.contains(x + 1)) link(ix, static_cast<int>(sys.index_of(x + 1)));
    for (Vertex y : env.long_neighbors(x)) {
      if (y > x && sys.contains(y)) link(ix, static_cast<int>(sys.index_of(y)));
    }
  }
  const int root = find(0);
  for (int i = 1; i < n; ++i) {
    if (find(i) != root) {
      throw DomainError("vertex set is disconnected: the component containing vertex " +
                        vertex_text(sys.vertices_[static_cast<std::size_t>(i)]) +
                        " is not connected to vertex " + vertex_text(sys.vertices_.front()));
    }
  }
  for (int i = 0; i < n; ++i) triplets.emplace_back(i, i, diag[static_cast<std::size_t>(i)]);
  sys.laplacian_.resize(n, n);
  sys.laplacian_.setFromTriplets(triplets.begin(), triplets.end());
  sys.factorize(solver);
  return sys;
}

LinearSystem LinearSystem::regrounded(Vertex ground) const {
  LinearSystem sys = *this;
  sys.ground_ = index_of(ground);
  sys.factorize(solver());
  return sys;
}

SparseMatrix LinearSystem::grounded_block() const {
  const auto n = static_cast<int>(size());
  const auto g = static_cast<int>(ground_);
  SparseMatrix block(n - 1, n - 1);
  block.reserve(laplacian_.nonZeros());
  for (int col = 0; col < n; ++col) {
    if (col == g) continue;
    block.startVec(col < g ? col : col - 1);
    for (SparseMatrix::InnerIterator it(laplacian_, col); it; ++it) {
      const int row = static_cast<int>(it.row());
      if (row == g) continue;
      block.insertBack(row < g ? row : row - 1, col < g ? col : col - 1) = it.value();
    }
  }
  block.finalize();
  return block;
}

void LinearSystem::factorize(SolverKind solver) {
  if (solver == SolverKind::automatic) {
    solver = size() > kDirectSolverLimit ? SolverKind::iterative : SolverKind::direct;
  }
  auto factor = std::make_shared<Factor>();
  factor->kind = solver;
  if (size() > 1) {
    factor->grounded = grounded_block();
    if (solver == SolverKind::direct) {
      factor->ldlt.compute(factor->grounded);
      if (factor->ldlt.info() != Eigen::Success) {
        throw InvariantViolation("grounded Laplacian is not positive definite");
      }
      factor->grounded = SparseMatrix();
    } else {
      factor->cg.setTolerance(1e-10);
      factor->cg.setMaxIterations(static_cast<Eigen::Index>(std::max<std::int64_t>(1000, 4 * size())));
      factor->cg.compute(factor->grounded);
    }
  }
  factor_ = std::move(factor);
}

Eigen::VectorXd LinearSystem::scatter(const Eigen::VectorXd& reduced) const {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(size());
  const auto g = ground_;
  full.head(g) = reduced.head(g);
  full.tail(size() - g - 1) = reduced.tail(size() - g - 1);
  return full;
}

Eigen::VectorXd LinearSystem::solve(const Eigen::VectorXd& b) const {
  if (b.size() != size()) throw DomainError("right-hand side has the wrong length");
  if (size() == 1) return Eigen::VectorXd::Zero(1);
  const auto g = ground_;
  Eigen::VectorXd reduced(size() - 1);
  reduced.head(g) = b.head(g);
  reduced.tail(size() - g - 1) = b.tail(size() - g - 1);
  Eigen::VectorXd x;
  if (factor_->kind == SolverKind::direct) {
    x = factor_->ldlt.solve(reduced);
  } else {
    std::lock_guard lock(factor_->cg_mutex);
    x = factor_->cg.solve(reduced);
    if (factor_->cg.info() != Eigen::Success) {
      throw NumericValidityError("conjugate gradient did not reach tolerance 1e-10");
    }
  }
  return scatter(x);
}

Eigen::MatrixXd LinearSystem::solve(const Eigen::MatrixXd& b) const {
  if (b.rows() != size()) throw DomainError("right-hand side has the wrong number of rows");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(size(), b.cols());
  if (size() == 1) return out;
  const auto g = ground_;
  const auto tail = size() - g - 1;
  Eigen::MatrixXd reduced(size() - 1, b.cols());
  reduced.topRows(g) = b.topRows(g);
  reduced.bottomRows(tail) = b.bottomRows(tail);
  Eigen::MatrixXd x;
  if (factor_->kind == SolverKind::direct) {
    x = factor_->ldlt.solve(reduced);
  } else {
    std::lock_guard lock(factor_->cg_mutex);
    x = factor_->cg.solve(reduced);
  }
  out.topRows(g) = x.topRows(g);
  out.bottomRows(tail) = x.bottomRows(tail);
  return out;
}

double LinearSystem::energy(const Eigen::VectorXd& f) const {
  if (f.size() != size()) throw DomainError("potential has the wrong length");
  return f.dot(laplacian_ * f);
}

// Takahashi recurrences on P A P^T = L D L^T (unit lower L). With
// Z = A^{-1} and S_j the row pattern of column j of L:
//   Z(i,j) = -sum_{k in S_j} L(k,j) Z(i,k)   for i in S_j
//   Z(j,j) = 1/D(j) - sum_{k in S_j} L(k,j) Z(k,j)
// processed from the last column backwards. Z is only formed on the
// pattern of L, which is closed under these recurrences.
Eigen::VectorXd LinearSystem::inverse_diagonal() const {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(size());
  if (size() == 1) return full;
  if (factor_->kind != SolverKind::direct) {
    throw DomainError("selected inversion needs the direct solver");
  }
  const auto& ldlt = factor_->ldlt;
  const SparseMatrix& L = ldlt.matrixL().nestedExpression();
  const Eigen::VectorXd& d = ldlt.vectorD();
  const int m = static_cast<int>(L.cols());
  const int* outer = L.outerIndexPtr();
  const int* inner = L.innerIndexPtr();
  const double* lval = L.valuePtr();
  const int* counts = L.innerNonZeroPtr();
  auto col_end = [&](int j) { return counts ? outer[j] + counts[j] : outer[j + 1]; };

  std::vector<double> zval(static_cast<std::size_t>(outer[m]), 0.0);
  std::vector<double> zdiag(static_cast<std::size_t>(m), 0.0);
  std::vector<int> pos(static_cast<std::size_t>(m), -1);
  std::vector<double> acc;

  for (int j = m - 1; j >= 0; --j) {
    const int p0 = outer[j];
    const int p1 = col_end(j);
    const int len = p1 - p0;
    acc.assign(static_cast<std::size_t>(len), 0.0);
    for (int p = p0; p < p1; ++p) pos[static_cast<std::size_t>(inner[p])] = p - p0;
    for (int p = p0; p < p1; ++p) {
      const int k = inner[p];
      const double lkj = lval[p];
      acc[static_cast<std::size_t>(p - p0)] += lkj * zdiag[static_cast<std::size_t>(k)];
      for (int q = outer[k]; q < col_end(k); ++q) {
        const int i = inner[q];
        const int slot = pos[static_cast<std::size_t>(i)];
        if (slot < 0) continue;
        const double zik = zval[static_cast<std::size_t>(q)];
        acc[static_cast<std::size_t>(slot)] += zik * lkj;
        acc[static_cast<std::size_t>(p - p0)] += zik * lval[p0 + slot];
      }
    }
    double diag = 1.0 / d[j];
    for (int p = p0; p < p1; ++p) {
      const double z = -acc[static_cast<std::size_t>(p - p0)];
      zval[static_cast<std::size_t>(p)] = z;
      diag -= lval[p] * z;
      pos[static_cast<std::size_t>(inner[p])] = -1;
    }
    zdiag[static_cast<std::size_t>(j)] = diag;
  }

  const auto& perm = ldlt.permutationP().indices();
  const auto g = ground_;
  for (int r = 0; r < m; ++r) {
    const auto original = r < g ? r : r + 1;
    full[original] = zdiag[static_cast<std::size_t>(perm[r])];
  }
  return full;
}

Eigen::VectorXd LinearSystem::inverse_diagonal_by_solves() const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(size());
  Eigen::VectorXd e = Eigen::VectorXd::Zero(size());
  for (std::int64_t i = 0; i < size(); ++i) {
    if (i == ground_) continue;
    e[i] = 1.0;
    out[i] = solve(e)[i];
    e[i] = 0.0;
  }
  return out;
}

Eigen::VectorXi LinearSystem::ordering() const {
  if (size() == 1 || factor_->kind != SolverKind::direct) return {};
  return factor_->ldlt.permutationP().indices();
}

std::int64_t LinearSystem::factor_nonzeros() const {
  if (size() == 1 || factor_->kind != SolverKind::direct) return 0;
  return factor_->ldlt.matrixL().nestedExpression().nonZeros();
}

}  // namespace lrp
