#pragma once

// Pseudo-gradients of the company game, step-size bounds and the
// Krasnoselskij projected-gradient iteration.

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "feasible_sets.hpp"
#include "model.hpp"

namespace fleetcharge {

/// Misestimated demand per company: D_i^Delta = Dbar_i^* - D_i^*.
struct DemandPerturbation {
  std::vector<Diagonal> delta;

  static DemandPerturbation none(const GameInstance& g) {
    return {std::vector<Diagonal>(g.num_companies(), Diagonal::Zero(static_cast<Eigen::Index>(g.num_stations())))};
  }
  bool is_zero() const {
    for (const auto& d : delta)
      if (!d.isZero(0.0)) return false;
    return true;
  }
};

/// Affine pseudo-gradient in aggregative form. Company i sees only its own
/// block and the aggregate:
///   F_i(x) = P_i x^i + R_i sigma(x) + s_i,   P_i, R_i diagonal.
class AggregativeGame {
 public:
  AggregativeGame() = default;
  AggregativeGame(Vector fleets, std::vector<Diagonal> own, std::vector<Diagonal> agg, std::vector<Vector> offset)
      : fleets_(std::move(fleets)), own_(std::move(own)), agg_(std::move(agg)), offset_(std::move(offset)) {
    const auto c = static_cast<std::size_t>(fleets_.size());
    if (c == 0 || own_.size() != c || agg_.size() != c || offset_.size() != c)
      throw DimensionMismatch("aggregative game blocks");
    m_ = static_cast<std::size_t>(own_[0].size());
    for (std::size_t i = 0; i < c; ++i) {
      require_size(own_[i], static_cast<Eigen::Index>(m_), "own weight");
      require_size(agg_[i], static_cast<Eigen::Index>(m_), "aggregate weight");
      require_size(offset_[i], static_cast<Eigen::Index>(m_), "offset");
    }
  }

  std::size_t num_players() const { return own_.size(); }
  std::size_t num_stations() const { return m_; }
  Eigen::Index dimension() const { return static_cast<Eigen::Index>(m_ * own_.size()); }
  const Vector& fleets() const { return fleets_; }

  Vector block_gradient(std::size_t i, const Vector& xi, const Vector& sigma) const {
    return own_[i].cwiseProduct(xi) + agg_[i].cwiseProduct(sigma) + offset_[i];
  }

  Vector operator()(const Vector& x) const {
    if (x.size() != dimension()) throw DimensionMismatch("stacked allocation length");
    const Vector sigma = aggregate(x, fleets_, m_);
    Vector out(x.size());
    for (std::size_t i = 0; i < num_players(); ++i) block(out, i, m_) = block_gradient(i, block(x, i, m_), sigma);
    return out;
  }

  /// F_1 as a dense matrix; block (i, j) = delta_ij P_i + N_j R_i.
  Matrix jacobian() const {
    const auto m = static_cast<Eigen::Index>(m_);
    Matrix f = Matrix::Zero(dimension(), dimension());
    for (std::size_t i = 0; i < num_players(); ++i)
      for (std::size_t j = 0; j < num_players(); ++j) {
        Vector d = fleets_[static_cast<Eigen::Index>(j)] * agg_[i];
        if (i == j) d += own_[i];
        f.block(static_cast<Eigen::Index>(i) * m, static_cast<Eigen::Index>(j) * m, m, m) = d.asDiagonal();
      }
    return f;
  }

  /// F_2 = F(0).
  Vector constant() const {
    Vector out(dimension());
    for (std::size_t i = 0; i < num_players(); ++i) block(out, i, m_) = offset_[i];
    return out;
  }

 private:
  Vector fleets_;
  std::vector<Diagonal> own_, agg_;
  std::vector<Vector> offset_;
  std::size_t m_ = 0;
};

/// Game under system optimal prices: F_i = N_i (A_G sigma + b_G).
inline AggregativeGame pricing_game(const GameInstance& g) {
  const auto m = static_cast<Eigen::Index>(g.num_stations());
  std::vector<Diagonal> own, agg;
  std::vector<Vector> off;
  for (const auto& c : g.companies) {
    own.push_back(Diagonal::Zero(m));
    agg.push_back(c.fleet * g.objective.weight);
    off.push_back(c.fleet * g.objective.linear);
  }
  return AggregativeGame(g.fleets(), std::move(own), std::move(agg), std::move(off));
}

/// Game under approximate prices. The extra gradient term of company i is
/// D_i^Delta D_i [A_bar x^i + B_bar sigma(x^-i) + Delta].
inline AggregativeGame pricing_game(const GameInstance& g, const DemandPerturbation& p) {
  if (p.delta.size() != g.num_companies()) throw DimensionMismatch("one demand perturbation per company");
  const auto m = static_cast<Eigen::Index>(g.num_stations());
  std::vector<Diagonal> own, agg;
  std::vector<Vector> off;
  for (std::size_t i = 0; i < g.num_companies(); ++i) {
    const auto& c = g.companies[i];
    require_size(p.delta[i], m, "D_i^Delta");
    const double n = c.fleet;
    const Diagonal phi = p.delta[i].cwiseProduct(c.demand);
    const Diagonal a_bar = n * n * g.objective.weight - c.queuing.A;
    const Diagonal b_bar = n * g.objective.weight - c.queuing.B;
    const Vector delta = n * g.objective.linear - c.queuing.c - c.revenue;
    own.push_back(phi.cwiseProduct(a_bar - n * b_bar));
    agg.push_back(n * g.objective.weight + phi.cwiseProduct(b_bar));
    off.push_back(n * g.objective.linear + phi.cwiseProduct(delta));
  }
  return AggregativeGame(g.fleets(), std::move(own), std::move(agg), std::move(off));
}

/// Game with constant prices pbar (same vector for every company):
/// F_i = A_i x^i + B_i sigma(x^-i) + c_i + D_i pbar + f_i.
inline AggregativeGame fixed_price_game(const GameInstance& g, const Vector& price) {
  const auto m = static_cast<Eigen::Index>(g.num_stations());
  require_size(price, m, "fixed price");
  if ((price.array() < 0).any()) throw InvalidParameter("fixed prices must be nonnegative");
  std::vector<Diagonal> own, agg;
  std::vector<Vector> off;
  for (const auto& c : g.companies) {
    own.push_back(c.queuing.A - c.fleet * c.queuing.B);
    agg.push_back(c.queuing.B);
    off.push_back(c.queuing.c + c.demand.cwiseProduct(price) + c.revenue);
  }
  return AggregativeGame(g.fleets(), std::move(own), std::move(agg), std::move(off));
}

// ---------------------------------------------------------------------------
// Step sizes.

/// lambda_max((N N') kron A_G) = ||N||^2 max_j A_G,jj.
inline double lambda_max_closed_form(const Vector& fleets, const Diagonal& weight) {
  return fleets.squaredNorm() * weight.maxCoeff();
}

/// Largest eigenvalue for symmetric F_1, spectral norm otherwise.
inline double operator_norm(const Matrix& f) {
  if ((f - f.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, f.cwiseAbs().maxCoeff())) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(f, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  return Eigen::JacobiSVD<Matrix>(f).singularValues()[0];
}

inline double step_size_bound(const GameInstance& g) {
  const double l = lambda_max_closed_form(g.fleets(), g.objective.weight);
  if (!(l > 0)) throw InternalError("nonpositive lambda_max");
  return 2.0 / l;
}

inline double step_size_bound(const GameInstance& g, const DemandPerturbation& p) {
  if (p.is_zero()) return step_size_bound(g);
  const double l = operator_norm(pricing_game(g, p).jacobian());
  if (!(l > 0)) throw InternalError("nonpositive operator norm");
  return 2.0 / l;
}

inline double step_size_bound(const AggregativeGame& game) {
  const double l = operator_norm(game.jacobian());
  if (!(l > 0)) throw InternalError("nonpositive operator norm");
  return 2.0 / l;
}

// ---------------------------------------------------------------------------
// Iteration.

struct SolveOptions {
  double step = 0;             // 0 selects step_fraction * step bound
  double step_fraction = 0.9;
  std::size_t max_iterations = 1000;
  double tolerance = 1e-8;
  bool record_trace = true;
};

struct SolveReport {
  Vector solution;
  /// Per visited iterate x_0 .. x_K (only the last entry when tracing is off).
  std::vector<Vector> iterates;
  std::vector<Vector> sigma;
  std::vector<double> government_cost;
  std::vector<double> residuals;
  std::size_t iterations = 0;
  double step = 0;
  double step_bound = 0;
  bool converged = false;
};

/// One application of x -> Pi_X[x - gamma F(x)], company by company from
/// the shared aggregate.
inline Vector forward_backward(const AggregativeGame& game, const std::vector<AdmissiblePolytope>& sets,
                               const Vector& x, double step) {
  const std::size_t m = game.num_stations();
  const Vector sigma = aggregate(x, game.fleets(), m);
  Vector out(x.size());
  for (std::size_t i = 0; i < game.num_players(); ++i) {
    const Vector xi = block(x, i, m);
    block(out, i, m) = project(xi - step * game.block_gradient(i, xi, sigma), sets[i]);
  }
  return out;
}

inline double nash_residual(const AggregativeGame& game, const std::vector<AdmissiblePolytope>& sets,
                            const Vector& x, double step) {
  return (x - forward_backward(game, sets, x, step)).norm();
}

/// Each company uniform over the stations it can reach (singleton bound
/// positive), then projected onto its polytope.
inline Vector default_start(const std::vector<AdmissiblePolytope>& sets) {
  if (sets.empty()) throw InvalidParameter("no companies");
  const std::size_t m = sets[0].num_stations();
  Vector x(static_cast<Eigen::Index>(m * sets.size()));
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (sets[i].empty()) throw EmptyPolytope("company " + std::to_string(i) + " has no admissible allocation");
    Vector xi = Vector::Ones(static_cast<Eigen::Index>(m));
    for (const auto& c : sets[i].constraints())
      if (std::popcount(c.subset) == 1 && c.rhs <= 0) xi[std::countr_zero(c.subset)] = 0;
    if (xi.sum() == 0) xi.setOnes();
    block(x, i, m) = project(xi / xi.sum(), sets[i]);
  }
  return x;
}

inline SolveReport solve_nash(const AggregativeGame& game, const std::vector<AdmissiblePolytope>& sets,
                              const GovernmentObjective& objective, const Vector& x0,
                              const SolveOptions& opt = {}) {
  const std::size_t m = game.num_stations();
  if (sets.size() != game.num_players()) throw DimensionMismatch("one polytope per company");
  if (x0.size() != game.dimension()) throw DimensionMismatch("initial allocation length");
  for (std::size_t i = 0; i < sets.size(); ++i)
    if (sets[i].empty()) throw EmptyPolytope("company " + std::to_string(i) + " has no admissible allocation");

  SolveReport rep;
  rep.step_bound = step_size_bound(game);
  rep.step = opt.step > 0 ? opt.step : opt.step_fraction * rep.step_bound;
  if (!(rep.step > 0) || !(rep.step < rep.step_bound))
    throw InvalidParameter("step size outside (0, 2/lambda_max)");

  Vector x(x0.size());
  for (std::size_t i = 0; i < sets.size(); ++i) block(x, i, m) = project(block(x0, i, m), sets[i]);

  auto record = [&](const Vector& xk, double res) {
    const Vector s = aggregate(xk, game.fleets(), m);
    if (opt.record_trace || rep.iterates.empty()) {
      rep.iterates.push_back(xk);
      rep.sigma.push_back(s);
      rep.government_cost.push_back(government_cost(s, objective));
      rep.residuals.push_back(res);
    } else {
      rep.iterates.back() = xk;
      rep.sigma.back() = s;
      rep.government_cost.back() = government_cost(s, objective);
      rep.residuals.back() = res;
    }
  };

  for (std::size_t k = 0;; ++k) {
    const Vector t = forward_backward(game, sets, x, rep.step);
    const double res = (x - t).norm();
    if (!std::isfinite(res)) throw InternalError("iteration diverged");
    record(x, res);
    if (res <= opt.tolerance) {
      rep.converged = true;
      break;
    }
    if (k == opt.max_iterations) break;
    x = 0.5 * (x + t);
    rep.iterations = k + 1;
  }
  rep.solution = x;
  return rep;
}

}  // namespace fleetcharge
