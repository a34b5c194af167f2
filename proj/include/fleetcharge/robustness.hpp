#pragma once

// Misestimated demand: perturbation sampling, the convexity assumption,
// the epsilon-equilibrium bound, the government-loss gap bound and the
// alpha sweep comparing approximate prices with fixed-price baselines.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "equilibrium.hpp"

namespace fleetcharge {

struct Perturbation {
  double alpha = 0;
  std::uint64_t seed = 0;
  DemandPerturbation demand;       // D_i^Delta
  std::vector<Diagonal> estimate;  // Dbar_i
  std::vector<Vector> noise;       // w per company, zero on infeasible stations
};

/// Smallest nonzero diagonal entry; 0 when the diagonal is all zero.
inline double min_nonzero(const Diagonal& d) {
  double out = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < d.size(); ++k)
    if (std::abs(d[k]) >= kPseudoInverseThreshold) out = std::min(out, d[k]);
  return std::isinf(out) ? 0.0 : out;
}

/// Dbar_kk = D_kk + w_k with w_k ~ N(0, (alpha D_min / 4)^2) on feasible
/// stations. Draws that would make Dbar_kk <= 0 are redrawn.
inline Perturbation build_perturbation(const GameInstance& g, double alpha, std::uint64_t seed) {
  if (!(alpha >= 0)) throw InvalidParameter("alpha must be nonnegative");
  Perturbation p;
  p.alpha = alpha;
  p.seed = seed;
  p.demand = DemandPerturbation::none(g);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < g.num_companies(); ++i) {
    const Diagonal& d = g.companies[i].demand;
    const double sd = alpha * min_nonzero(d) / 4.0;
    Vector w = Vector::Zero(d.size());
    Diagonal est = d;
    for (Eigen::Index k = 0; k < d.size(); ++k) {
      if (std::abs(d[k]) < kPseudoInverseThreshold) continue;
      int tries = 0;
      do {
        if (++tries > 1000) throw InternalError("could not draw a positive demand estimate");
        w[k] = sd * unit(rng);
      } while (d[k] + w[k] <= 0);
      est[k] = d[k] + w[k];
      p.demand.delta[i][k] = 1.0 / est[k] - 1.0 / d[k];
    }
    p.noise.push_back(std::move(w));
    p.estimate.push_back(std::move(est));
  }
  return p;
}

/// N_i^2 (I + D_i D_i^Delta) A_G - D_i D_i^Delta A_i >= 0, entrywise since
/// every factor is diagonal.
inline bool check_convexity_assumption(const GameInstance& g, const DemandPerturbation& p) {
  for (std::size_t i = 0; i < g.num_companies(); ++i) {
    const auto& c = g.companies[i];
    const Diagonal dd = c.demand.cwiseProduct(p.delta[i]);
    const Diagonal m = c.fleet * c.fleet * (Diagonal::Ones(dd.size()) + dd).cwiseProduct(g.objective.weight) -
                       dd.cwiseProduct(c.queuing.A);
    if ((m.array() < 0).any()) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Epsilon bound.

/// Gradient bound of 1/2 t' Abar_G t + t' bbar_G over ||t|| <= sum N,
/// Abar_G = [[A_G, A_G], [A_G, 0]], bbar_G = [b_G; 0]. The same for every
/// company, so it is also eta_bar.
inline double lipschitz_eta(const GameInstance& g) {
  const auto m = static_cast<Eigen::Index>(g.num_stations());
  Matrix abar = Matrix::Zero(2 * m, 2 * m);
  const Matrix a = g.objective.weight.asDiagonal();
  abar.topLeftCorner(m, m) = a;
  abar.topRightCorner(m, m) = a;
  abar.bottomLeftCorner(m, m) = a;
  const double norm = Eigen::SelfAdjointEigenSolver<Matrix>(abar, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().maxCoeff();
  return norm * g.fleets().sum() + g.objective.linear.norm();
}

inline double epsilon_bound(const GameInstance& g) {
  const Vector n = g.fleets();
  return 4.0 * lipschitz_eta(g) * (n.sum() - 0.5 * n.minCoeff());
}

/// Company i's gain from deviating to its best response under system
/// optimal prices: J^i(x^i, x^-i) - min_z J^i(z, x^-i). The reduced cost is
/// strongly convex in z, so accelerated projected gradient converges fast.
inline double best_response_gain(const GameInstance& g, const AdmissiblePolytope& set, std::size_t i,
                                 const Vector& x, std::size_t max_iter = 5000, double tol = 1e-13) {
  const std::size_t m = g.num_stations();
  const Vector others = aggregate_except(x, g.fleets(), m, i);
  const Vector xi = block(x, i, m);
  const double n = g.companies[i].fleet;
  const double lip = n * n * g.objective.weight.maxCoeff();
  const double mu = n * n * g.objective.weight.minCoeff();
  const double q = std::sqrt(mu / lip);
  const double beta = (1 - q) / (1 + q);
  Vector z = xi, prev = xi;
  for (std::size_t k = 0; k < max_iter; ++k) {
    const Vector y = z + beta * (z - prev);
    const Vector next = project(y - reduced_cost_gradient(g, i, y, others) / lip, set);
    prev = z;
    z = next;
    if ((z - prev).norm() <= tol) break;
  }
  return reduced_cost(g, i, xi, others) - reduced_cost(g, i, z, others);
}

// ---------------------------------------------------------------------------
// Government-loss gap.

struct GapBound {
  double observed = 0;       // J_G^best - J_G(sigma(x*))
  double bound = 0;          // derived form, psi sum divided by (K+1)
  double bound_printed = 0;  // psi sum divided by gamma (K+1)
  double psi_sum = 0;
  double r_x = 0;
  double r_f = 0;
  std::size_t iterations = 0;
};

/// psi(x) = DeltaF(x)'(x - x*), DeltaF = Ftilde - F.
inline double psi(const AggregativeGame& perturbed, const AggregativeGame& exact, const Vector& x, const Vector& x_star) {
  return (perturbed(x) - exact(x)).dot(x - x_star);
}

/// R_Ftilde = ||F1 + Phi L1|| R_x + ||F2 + Phi L2|| with R_x = sqrt(m_c),
/// since each block lies on a simplex.
inline double gradient_norm_bound(const AggregativeGame& perturbed, double r_x) {
  const Matrix j = perturbed.jacobian();
  return Eigen::JacobiSVD<Matrix>(j).singularValues()[0] * r_x + perturbed.constant().norm();
}

inline GapBound jg_gap_bound(const GameInstance& g, const DemandPerturbation& p, const SolveReport& trace,
                             const Vector& x_star) {
  if (trace.iterates.empty()) throw InvalidParameter("empty iterate trace");
  const auto perturbed = pricing_game(g, p);
  const auto exact = pricing_game(g);
  GapBound out;
  out.r_x = std::sqrt(static_cast<double>(g.num_companies()));
  out.r_f = gradient_norm_bound(perturbed, out.r_x);
  const double j_star = government_cost(aggregate(x_star, g.fleets(), g.num_stations()), g.objective);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < trace.iterates.size(); ++k) {
    out.psi_sum += psi(perturbed, exact, trace.iterates[k], x_star);
    best = std::min(best, trace.government_cost[k]);
  }
  const double kp1 = static_cast<double>(trace.iterates.size());
  const double gamma = trace.step;
  const double head = (trace.iterates.front() - x_star).squaredNorm() / (gamma * kp1) + gamma * out.r_f * out.r_f / 2.0;
  out.observed = best - j_star;
  out.bound = head - out.psi_sum / kp1;
  out.bound_printed = head - out.psi_sum / (gamma * kp1);
  out.iterations = trace.iterates.size() - 1;
  return out;
}

// ---------------------------------------------------------------------------
// Sweep.

/// A copy of the game in which every company's demand is replaced by the
/// estimate. Fixed-price baselines are evaluated on this copy.
inline GameInstance with_demand(const GameInstance& g, const std::vector<Diagonal>& demand) {
  GameInstance out = g;
  for (std::size_t i = 0; i < g.num_companies(); ++i) out.companies[i].demand = demand.at(i);
  return out;
}

struct SweepRow {
  double alpha = 0;
  std::size_t sample = 0;
  std::string mechanism;
  double j_g = 0;
  bool assumption_ok = true;
};

struct SweepCheck {
  double alpha = 0;
  std::size_t sample = 0;
  bool assumption_ok = true;
  double epsilon_observed = 0;  // max over companies of the best-response gain
  double epsilon_bound = 0;
  GapBound gap;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepCheck> checks;
  double optimum = 0;  // unperturbed J_G at the equilibrium

  /// Mean J_G per (alpha, mechanism).
  std::map<std::pair<double, std::string>, double> means() const {
    std::map<std::pair<double, std::string>, std::pair<double, std::size_t>> acc;
    for (const auto& r : rows) {
      auto& a = acc[{r.alpha, r.mechanism}];
      a.first += r.j_g;
      ++a.second;
    }
    std::map<std::pair<double, std::string>, double> out;
    for (const auto& [k, v] : acc) out[k] = v.first / static_cast<double>(v.second);
    return out;
  }
};

struct SweepOptions {
  std::vector<double> alphas{0.0, 0.05, 0.1, 0.15, 0.25, 0.35};
  std::size_t samples = 100;
  std::uint64_t seed = 1;
  SolveOptions solve;
  std::vector<std::pair<std::string, Vector>> baselines;
  bool check_bounds = true;
};

/// Per-sample seed, independent of evaluation order.
inline std::uint64_t sample_seed(std::uint64_t base, std::size_t alpha_index, std::size_t sample) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(alpha_index), static_cast<std::uint32_t>(sample)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

inline SweepResult robustness_sweep(const GameInstance& g, const std::vector<AdmissiblePolytope>& sets,
                                    const SweepOptions& opt) {
  if (opt.samples < 1) throw InvalidParameter("at least one sample per alpha");
  const Vector x0 = default_start(sets);
  SolveOptions tight = opt.solve;
  tight.tolerance = std::min(tight.tolerance, 1e-12);
  tight.max_iterations = std::max<std::size_t>(tight.max_iterations, 100000);
  tight.record_trace = false;
  const auto exact = solve_nash(pricing_game(g), sets, g.objective, x0, tight);
  const Vector& x_star = exact.solution;
  SweepResult res;
  res.optimum = exact.government_cost.back();
  const double eps_bound = epsilon_bound(g);

  for (std::size_t a = 0; a < opt.alphas.size(); ++a) {
    const double alpha = opt.alphas[a];
    if (!(alpha >= 0)) throw InvalidParameter("alpha must be nonnegative");
    for (std::size_t s = 0; s < opt.samples; ++s) {
      const auto pert = build_perturbation(g, alpha, sample_seed(opt.seed, a, s));
      const bool ok = check_convexity_assumption(g, pert.demand);
      const auto game = pricing_game(g, pert.demand);
      SolveOptions so = opt.solve;
      so.record_trace = opt.check_bounds;
      const auto rep = solve_nash(game, sets, g.objective, x0, so);
      res.rows.push_back({alpha, s, "rsg", rep.government_cost.back(), ok});

      if (opt.check_bounds) {
        SweepCheck chk;
        chk.alpha = alpha;
        chk.sample = s;
        chk.assumption_ok = ok;
        chk.epsilon_bound = eps_bound;
        for (std::size_t i = 0; i < g.num_companies(); ++i)
          chk.epsilon_observed = std::max(chk.epsilon_observed, best_response_gain(g, sets[i], i, rep.solution));
        chk.gap = jg_gap_bound(g, pert.demand, rep, x_star);
        res.checks.push_back(chk);
      }

      const GameInstance shifted = with_demand(g, pert.estimate);
      for (const auto& [name, price] : opt.baselines) {
        SolveOptions bo = opt.solve;
        bo.record_trace = false;
        const auto b = solve_nash(fixed_price_game(shifted, price), sets, g.objective, x0, bo);
        res.rows.push_back({alpha, s, name, b.government_cost.back(), ok});
      }
    }
  }
  return res;
}

}  // namespace fleetcharge
