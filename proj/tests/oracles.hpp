#pragma once

// Independent reference solvers used only by the tests. None of these share
// code paths with the library routines they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "fleetcharge/feasible_sets.hpp"
#include "fleetcharge/model.hpp"

namespace oracle {

using fleetcharge::Matrix;
using fleetcharge::Vector;

/// Max-flow (Edmonds-Karp) on the bipartite graph vehicles -> station clones,
/// with n_j clones of station j. True when every clone can be saturated.
inline bool matching_exists(const std::vector<long>& n, const fleetcharge::FleetReachability& fleet) {
  const std::size_t vehicles = fleet.num_vehicles();
  std::vector<std::size_t> clone_station;
  for (std::size_t j = 0; j < n.size(); ++j)
    for (long c = 0; c < n[j]; ++c) clone_station.push_back(j);
  const std::size_t clones = clone_station.size();
  if (clones != vehicles) return false;
  const std::size_t source = 0, sink = 1 + vehicles + clones, nodes = sink + 1;
  std::vector<std::vector<int>> cap(nodes, std::vector<int>(nodes, 0));
  for (std::size_t v = 0; v < vehicles; ++v) {
    cap[source][1 + v] = 1;
    for (std::size_t c = 0; c < clones; ++c)
      if (fleetcharge::has_station(fleet.reachable(v), clone_station[c])) cap[1 + v][1 + vehicles + c] = 1;
  }
  for (std::size_t c = 0; c < clones; ++c) cap[1 + vehicles + c][sink] = 1;

  std::size_t flow = 0;
  for (;;) {
    std::vector<int> parent(nodes, -1);
    parent[source] = static_cast<int>(source);
    std::queue<std::size_t> q;
    q.push(source);
    while (!q.empty() && parent[sink] < 0) {
      const std::size_t a = q.front();
      q.pop();
      for (std::size_t b = 0; b < nodes; ++b)
        if (parent[b] < 0 && cap[a][b] > 0) {
          parent[b] = static_cast<int>(a);
          q.push(b);
        }
    }
    if (parent[sink] < 0) break;
    for (std::size_t b = sink; b != source; b = static_cast<std::size_t>(parent[b])) {
      const auto a = static_cast<std::size_t>(parent[b]);
      --cap[a][b];
      ++cap[b][a];
    }
    ++flow;
  }
  return flow == clones;
}

/// Dense description {x : E x = e, G x <= h} of an admissible polytope,
/// including every subset constraint (pruned or not).
struct DensePolytope {
  Matrix E;
  Vector e;
  Matrix G;
  Vector h;
};

inline DensePolytope dense(const fleetcharge::AdmissiblePolytope& poly) {
  const auto m = static_cast<Eigen::Index>(poly.num_stations());
  const auto& cons = poly.constraints();
  DensePolytope d;
  d.E = Matrix::Ones(1, m);
  d.e = Vector::Ones(1);
  d.G = Matrix::Zero(m + static_cast<Eigen::Index>(cons.size()), m);
  d.h = Vector::Zero(d.G.rows());
  for (Eigen::Index j = 0; j < m; ++j) d.G(j, j) = -1.0;
  for (std::size_t k = 0; k < cons.size(); ++k) {
    const auto row = m + static_cast<Eigen::Index>(k);
    for (Eigen::Index j = 0; j < m; ++j)
      if (fleetcharge::has_station(cons[k].subset, static_cast<std::size_t>(j))) d.G(row, j) = 1.0;
    d.h[row] = cons[k].rhs;
  }
  return d;
}

/// Euclidean projection by exhaustive enumeration of active sets: for every
/// subset of at most m-1 inequalities, solve the equality-constrained
/// least-distance problem and keep the closest feasible candidate.
inline std::optional<Vector> brute_force_projection(const Vector& y, const fleetcharge::AdmissiblePolytope& poly) {
  const DensePolytope d = dense(poly);
  const auto m = y.size();
  const auto rows = d.G.rows();
  std::optional<Vector> best;
  double best_dist = std::numeric_limits<double>::infinity();
  std::vector<Eigen::Index> chosen;
  auto evaluate = [&]() {
    const auto k = static_cast<Eigen::Index>(chosen.size()) + 1;
    Matrix A(k, m);
    Vector b(k);
    A.row(0) = d.E.row(0);
    b[0] = 1.0;
    for (Eigen::Index r = 1; r < k; ++r) {
      A.row(r) = d.G.row(chosen[static_cast<std::size_t>(r - 1)]);
      b[r] = d.h[chosen[static_cast<std::size_t>(r - 1)]];
    }
    // z = y - A' lambda with A z = b  =>  (A A') lambda = A y - b.
    Eigen::FullPivLU<Matrix> lu(A * A.transpose());
    if (lu.rank() < k) return;
    const Vector lambda = lu.solve(A * y - b);
    const Vector z = y - A.transpose() * lambda;
    if (((d.G * z - d.h).array() > 1e-10).any()) return;
    if (std::abs(z.sum() - 1.0) > 1e-10) return;
    const double dist = (z - y).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = z;
    }
  };
  // Depth-first enumeration of row subsets of size < m.
  std::function<void(Eigen::Index)> rec = [&](Eigen::Index start) {
    evaluate();
    if (static_cast<Eigen::Index>(chosen.size()) + 1 >= m) return;
    for (Eigen::Index r = start; r < rows; ++r) {
      chosen.push_back(r);
      rec(r + 1);
      chosen.pop_back();
    }
  };
  rec(0);
  return best;
}

/// Primal-dual interior point method for
///   min 1/2 x'Hx + c'x  s.t.  A x = b,  G x <= h
/// with H positive semidefinite.
struct QpResult {
  Vector x;
  double objective = 0;
  bool converged = false;
};

inline QpResult solve_qp(const Matrix& H, const Vector& c, const Matrix& A, const Vector& b, const Matrix& G,
                         const Vector& h, double tol = 1e-11, int max_iter = 200) {
  const auto n = H.rows(), p = A.rows(), q = G.rows();
  Vector x = Vector::Zero(n), y = Vector::Zero(p);
  // Dual residuals and complementarity are measured relative to the data.
  const double scale_d = 1.0 + std::max(H.cwiseAbs().maxCoeff(), c.lpNorm<Eigen::Infinity>());
  Vector s = Vector::Ones(q), z = Vector::Constant(q, std::sqrt(scale_d));
  // Start with slacks large enough to be strictly positive.
  {
    const Vector r = h - G * x;
    for (Eigen::Index i = 0; i < q; ++i) s[i] = std::max(1.0, r[i]);
  }
  QpResult out;
  for (int it = 0; it < max_iter; ++it) {
    const Vector rd = H * x + c + A.transpose() * y + G.transpose() * z;
    const Vector re = A * x - b;
    const Vector ri = G * x + s - h;
    const double mu = q > 0 ? s.dot(z) / static_cast<double>(q) : 0.0;
    if (rd.lpNorm<Eigen::Infinity>() < tol * scale_d && re.lpNorm<Eigen::Infinity>() < tol &&
        ri.lpNorm<Eigen::Infinity>() < tol && mu < tol * scale_d) {
      out.converged = true;
      break;
    }
    auto newton = [&](const Vector& rc, Vector& dx, Vector& dy, Vector& ds, Vector& dz) {
      const Vector w = z.cwiseQuotient(s);
      Matrix K = Matrix::Zero(n + p, n + p);
      K.topLeftCorner(n, n) = H + G.transpose() * w.asDiagonal() * G;
      K.topRightCorner(n, p) = A.transpose();
      K.bottomLeftCorner(p, n) = A;
      Vector rhs(n + p);
      rhs.head(n) = -rd - G.transpose() * (s.cwiseInverse().cwiseProduct(-rc + z.cwiseProduct(ri)));
      rhs.tail(p) = -re;
      // Symmetric row/column equilibration; the barrier weights spread over
      // many orders of magnitude near the solution.
      Vector d(n + p);
      for (Eigen::Index i = 0; i < n + p; ++i) d[i] = 1.0 / std::sqrt(std::max(K.row(i).cwiseAbs().maxCoeff(), 1e-300));
      const Eigen::FullPivLU<Matrix> lu(d.asDiagonal() * K * d.asDiagonal());
      auto solve = [&](const Vector& r) -> Vector { return d.cwiseProduct(lu.solve(d.cwiseProduct(r))); };
      Vector sol = solve(rhs);
      for (int refine = 0; refine < 3; ++refine) sol += solve(rhs - K * sol);
      dx = sol.head(n);
      dy = sol.tail(p);
      ds = -ri - G * dx;
      dz = s.cwiseInverse().cwiseProduct(-rc - z.cwiseProduct(ds));
    };
    auto max_step = [&](const Vector& v, const Vector& dv) {
      double a = 1.0;
      for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv[i] < 0) a = std::min(a, -v[i] / dv[i]);
      return a;
    };
    Vector dx, dy, ds, dz;
    // Predictor.
    newton(s.cwiseProduct(z), dx, dy, ds, dz);
    const double a_aff = std::min(max_step(s, ds), max_step(z, dz));
    const double mu_aff = q > 0 ? (s + a_aff * ds).dot(z + a_aff * dz) / static_cast<double>(q) : 0.0;
    const double sigma = mu > 0 ? std::pow(mu_aff / mu, 3) : 0.0;
    // Corrector.
    const Vector rc = s.cwiseProduct(z) + ds.cwiseProduct(dz) - Vector::Constant(q, sigma * mu);
    newton(rc, dx, dy, ds, dz);
    const double alpha = 0.99 * std::min(max_step(s, ds), max_step(z, dz));
    x += alpha * dx;
    y += alpha * dy;
    s += alpha * ds;
    z += alpha * dz;
  }
  out.x = x;
  out.objective = 0.5 * x.dot(H * x) + c.dot(x);
  return out;
}

/// Government optimum over the product of admissible polytopes, written
/// directly as a QP in the stacked allocation:
///   min 1/2 sigma' A_G sigma + b_G' sigma,  sigma = sum_i N_i x^i.
/// Returns the stacked minimiser.
inline QpResult government_optimum(const fleetcharge::GameInstance& g,
                                   const std::vector<fleetcharge::AdmissiblePolytope>& sets) {
  const auto m = static_cast<Eigen::Index>(g.num_stations());
  const auto c = static_cast<Eigen::Index>(g.num_companies());
  Matrix agg(m, m * c);  // sigma = agg x
  for (Eigen::Index i = 0; i < c; ++i)
    agg.block(0, i * m, m, m) = g.companies[static_cast<std::size_t>(i)].fleet * Matrix::Identity(m, m);
  const Matrix a = g.objective.weight.asDiagonal();
  const Matrix H = agg.transpose() * a * agg;
  const Vector lin = agg.transpose() * g.objective.linear;
  Matrix E = Matrix::Zero(c, m * c);
  std::vector<DensePolytope> parts;
  Eigen::Index rows = 0;
  for (Eigen::Index i = 0; i < c; ++i) {
    E.block(i, i * m, 1, m).setOnes();
    parts.push_back(dense(sets[static_cast<std::size_t>(i)]));
    rows += parts.back().G.rows();
  }
  Matrix G = Matrix::Zero(rows, m * c);
  Vector h(rows);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < c; ++i) {
    const auto& p = parts[static_cast<std::size_t>(i)];
    G.block(r, i * m, p.G.rows(), m) = p.G;
    h.segment(r, p.G.rows()) = p.h;
    r += p.G.rows();
  }
  return solve_qp(H, lin, E, Vector::Ones(c), G, h);
}

}  // namespace oracle
