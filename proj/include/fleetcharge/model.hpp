#pragma once

// Cost model of the charging game: stations, companies, the government's
// objective and the two families of pricing policies.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "linalg.hpp"

namespace fleetcharge {

struct StationSet {
  Vector capacity;      // M, vehicles per station
  Diagonal queue_cost;  // Q

  std::size_t size() const { return static_cast<std::size_t>(capacity.size()); }

  void validate() const {
    if (capacity.size() < 1) throw InvalidParameter("at least one station required");
    require_size(queue_cost, capacity.size(), "queue_cost");
    for (Eigen::Index j = 0; j < capacity.size(); ++j) {
      if (!(capacity[j] > 0)) throw InvalidParameter("station capacity must be positive");
      if (!(queue_cost[j] > 0)) throw InvalidParameter("queue cost must be positive");
    }
  }
};

/// Coefficients of the expected queuing cost written as
/// 1/2 x'Ax + x'B sigma(x^-i) + c'x.
struct QueuingParams {
  Diagonal A;
  Diagonal B;
  Vector c;
};

inline QueuingParams derive_queuing_params(double fleet, const Diagonal& Q,
                                           const Vector& M) {
  if (!(fleet > 0)) throw InvalidParameter("fleet size N_i must be positive");
  require_size(M, Q.size(), "capacity");
  if ((Q.array() <= 0).any()) throw InvalidParameter("Q must be positive diagonal");
  return QueuingParams{2.0 * fleet * fleet * Q, fleet * Q,
                       -fleet * Q.cwiseProduct(M)};
}

struct CompanyParams {
  double fleet = 0;     // N_i, vehicles that need charging
  Diagonal demand;      // D_i, zero on unreachable stations
  Vector revenue;       // f_i
  QueuingParams queuing;

  static CompanyParams make(double fleet, Diagonal demand, Vector revenue,
                            const StationSet& stations) {
    const auto m = static_cast<Eigen::Index>(stations.size());
    require_size(demand, m, "demand D_i");
    require_size(revenue, m, "revenue f_i");
    if ((demand.array() < 0).any()) throw InvalidParameter("D_i must be nonnegative");
    CompanyParams p;
    p.fleet = fleet;
    p.demand = std::move(demand);
    p.revenue = std::move(revenue);
    p.queuing = derive_queuing_params(fleet, stations.queue_cost, stations.capacity);
    return p;
  }
};

/// J_G(sigma) = 1/2 sigma' A_G sigma + b_G' sigma, optionally anchored at a
/// set point N_hat with b_G = -A_G N_hat.
struct GovernmentObjective {
  Diagonal weight;  // A_G
  Vector linear;    // b_G
  std::optional<Vector> set_point;

  static GovernmentObjective quadratic(Diagonal weight, Vector linear) {
    require_size(linear, weight.size(), "b_G");
    if ((weight.array() <= 0).any()) throw InvalidParameter("A_G must be positive diagonal");
    return GovernmentObjective{std::move(weight), std::move(linear), std::nullopt};
  }

  static GovernmentObjective from_set_point(Diagonal weight, Vector set_point) {
    require_size(set_point, weight.size(), "set point");
    if ((weight.array() <= 0).any()) throw InvalidParameter("A_G must be positive diagonal");
    Vector b = -weight.cwiseProduct(set_point);
    return GovernmentObjective{std::move(weight), std::move(b), std::move(set_point)};
  }

  std::size_t size() const { return static_cast<std::size_t>(weight.size()); }
};

/// Reported in set-point form when a set point exists, so the optimum reads 0.
inline double government_cost(const Vector& sigma, const GovernmentObjective& g) {
  require_size(sigma, g.weight.size(), "sigma");
  if (g.set_point) {
    const Vector e = sigma - *g.set_point;
    return 0.5 * e.dot(g.weight.cwiseProduct(e));
  }
  return 0.5 * sigma.dot(g.weight.cwiseProduct(sigma)) + g.linear.dot(sigma);
}

/// Gradient of J_G with respect to sigma.
inline Vector government_gradient(const Vector& sigma, const GovernmentObjective& g) {
  return g.weight.cwiseProduct(sigma) + g.linear;
}

/// N_hat = (sum_i N_i) Z.
inline Vector setpoint_from_distribution(const Vector& fleets, const Vector& Z) {
  if (!on_simplex(Z, 1e-9)) throw InvalidParameter("desired distribution Z is not on the simplex");
  if ((fleets.array() <= 0).any()) throw InvalidParameter("fleet sizes must be positive");
  return fleets.sum() * Z;
}

struct GameInstance {
  StationSet stations;
  std::vector<CompanyParams> companies;
  GovernmentObjective objective;

  std::size_t num_companies() const { return companies.size(); }
  std::size_t num_stations() const { return stations.size(); }

  Vector fleets() const {
    Vector n(static_cast<Eigen::Index>(companies.size()));
    for (std::size_t i = 0; i < companies.size(); ++i)
      n[static_cast<Eigen::Index>(i)] = companies[i].fleet;
    return n;
  }

  void validate() const {
    stations.validate();
    if (companies.empty()) throw InvalidParameter("at least one company required");
    const auto m = static_cast<Eigen::Index>(stations.size());
    require_size(objective.weight, m, "A_G");
    require_size(objective.linear, m, "b_G");
    for (const auto& c : companies) {
      require_size(c.demand, m, "D_i");
      require_size(c.revenue, m, "f_i");
    }
  }
};

// ---------------------------------------------------------------------------
// Allocation profiles. Company allocations are stacked company-major into one
// vector of length m_c * m_s.

inline auto block(Vector& x, std::size_t i, std::size_t m) {
  return x.segment(static_cast<Eigen::Index>(i * m), static_cast<Eigen::Index>(m));
}
inline auto block(const Vector& x, std::size_t i, std::size_t m) {
  return x.segment(static_cast<Eigen::Index>(i * m), static_cast<Eigen::Index>(m));
}

/// sigma(x) = sum_i N_i x^i.
inline Vector aggregate(const Vector& x, const Vector& fleets, std::size_t m) {
  if (static_cast<std::size_t>(x.size()) != m * static_cast<std::size_t>(fleets.size()))
    throw DimensionMismatch("stacked allocation length");
  Vector s = Vector::Zero(static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < fleets.size(); ++i)
    s += fleets[i] * block(x, static_cast<std::size_t>(i), m);
  return s;
}

/// sigma(x^-i).
inline Vector aggregate_except(const Vector& x, const Vector& fleets, std::size_t m,
                               std::size_t i) {
  return aggregate(x, fleets, m) - fleets[static_cast<Eigen::Index>(i)] * block(x, i, m);
}

// ---------------------------------------------------------------------------
// Company costs.

/// J_1 in its general quadratic form.
inline double queuing_cost(const QueuingParams& q, const Vector& x, const Vector& sigma_others) {
  return 0.5 * x.dot(q.A.cwiseProduct(x)) + x.dot(q.B.cwiseProduct(sigma_others)) + q.c.dot(x);
}

/// J^i = J_1 + x' D_i p_i + f_i' x for an arbitrary price vector.
inline double company_cost(const GameInstance& g, std::size_t i, const Vector& x,
                           const Vector& sigma_others, const Vector& price) {
  const auto m = static_cast<Eigen::Index>(g.num_stations());
  require_size(x, m, "x^i");
  require_size(sigma_others, m, "sigma(x^-i)");
  require_size(price, m, "p_i");
  const CompanyParams& c = g.companies.at(i);
  return queuing_cost(c.queuing, x, sigma_others) + x.dot(c.demand.cwiseProduct(price)) +
         c.revenue.dot(x);
}

/// Bracket 1/2 A_bar x + B_bar sigma(x^-i) + Delta shared by both policy
/// families. `half_quadratic` selects the 1/2 on A_bar (true for prices,
/// false for the gradient correction under approximate prices).
inline Vector policy_bracket(const GameInstance& g, std::size_t i, const Vector& x,
                             const Vector& sigma_others, bool half_quadratic = true) {
  const CompanyParams& c = g.companies.at(i);
  const double n = c.fleet;
  const Diagonal a_bar = n * n * g.objective.weight - c.queuing.A;
  const Diagonal b_bar = n * g.objective.weight - c.queuing.B;
  const Vector delta = n * g.objective.linear - c.queuing.c - c.revenue;
  const double s = half_quadratic ? 0.5 : 1.0;
  return s * a_bar.cwiseProduct(x) + b_bar.cwiseProduct(sigma_others) + delta;
}

/// System optimal price vector p_i(x^i, x^-i) = D_i^* [bracket].
inline Vector system_optimal_policy(const GameInstance& g, std::size_t i, const Vector& x,
                                    const Vector& sigma_others) {
  const auto m = static_cast<Eigen::Index>(g.num_stations());
  require_size(x, m, "x^i");
  require_size(sigma_others, m, "sigma(x^-i)");
  return pseudo_inverse(g.companies.at(i).demand).cwiseProduct(policy_bracket(g, i, x, sigma_others));
}

/// Policy built from a misestimated demand: (D_i^* + D_i^Delta) [bracket].
/// D_i^Delta is expected to vanish on unreachable stations.
inline Vector approximate_policy(const GameInstance& g, std::size_t i, const Vector& x,
                                 const Vector& sigma_others, const Diagonal& demand_delta) {
  const auto m = static_cast<Eigen::Index>(g.num_stations());
  require_size(demand_delta, m, "D_i^Delta");
  require_size(x, m, "x^i");
  require_size(sigma_others, m, "sigma(x^-i)");
  const Diagonal scale = pseudo_inverse(g.companies.at(i).demand) + demand_delta;
  return scale.cwiseProduct(policy_bracket(g, i, x, sigma_others));
}

/// Company cost after substituting the system optimal policy:
/// 1/2 N_i^2 x'A_G x + N_i x'A_G sigma(x^-i) + N_i b_G'x.
inline double reduced_cost(const GameInstance& g, std::size_t i, const Vector& x,
                           const Vector& sigma_others) {
  const double n = g.companies.at(i).fleet;
  const Diagonal& a = g.objective.weight;
  return 0.5 * n * n * x.dot(a.cwiseProduct(x)) + n * x.dot(a.cwiseProduct(sigma_others)) +
         n * g.objective.linear.dot(x);
}

/// Gradient of reduced_cost in x^i.
inline Vector reduced_cost_gradient(const GameInstance& g, std::size_t i, const Vector& x,
                                    const Vector& sigma_others) {
  const double n = g.companies.at(i).fleet;
  const Diagonal& a = g.objective.weight;
  return n * a.cwiseProduct(n * x + sigma_others) + n * g.objective.linear;
}

}  // namespace fleetcharge
