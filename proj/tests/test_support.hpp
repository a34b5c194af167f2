#pragma once

#include <random>

#include "fleetcharge/feasible_sets.hpp"
#include "fleetcharge/model.hpp"

namespace testing_support {

using fleetcharge::Diagonal;
using fleetcharge::Vector;

inline Vector random_simplex(Eigen::Index m, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Vector x(m);
  for (Eigen::Index j = 0; j < m; ++j) x[j] = e(rng);
  return x / x.sum();
}

/// Random game with positive demand on every station and a set-point
/// objective A_G = 2.5 Q.
inline fleetcharge::GameInstance random_instance(std::size_t companies, Eigen::Index m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  fleetcharge::StationSet st;
  st.capacity.resize(m);
  st.queue_cost.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    st.capacity[j] = 5 + std::floor(50 * u(rng));
    st.queue_cost[j] = 0.05 + 0.4 * u(rng);
  }
  std::vector<fleetcharge::CompanyParams> cs;
  double total = 0;
  for (std::size_t i = 0; i < companies; ++i) {
    const double n = 20 + std::floor(180 * u(rng));
    total += n;
    Diagonal d(m);
    Vector f(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      d[j] = n * (30 + 30 * u(rng));
      f[j] = n * (-100 + 60 * u(rng));
    }
    cs.push_back(fleetcharge::CompanyParams::make(n, d, f, st));
  }
  const Vector z = random_simplex(m, rng);
  auto obj = fleetcharge::GovernmentObjective::from_set_point(2.5 * st.queue_cost, total * z);
  return fleetcharge::GameInstance{st, std::move(cs), std::move(obj)};
}

/// The three-company, four-station reference game: N = [194, 181, 157],
/// N_hat = (198, 103, 144, 87), Q = 0.1 diag(4, 1, 3, 2), A_G = 2.5 Q.
inline fleetcharge::GameInstance reference_game(std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  fleetcharge::StationSet st{(Vector(4) << 15, 60, 35, 50).finished(), 0.1 * (Diagonal(4) << 4, 1, 3, 2).finished()};
  std::vector<fleetcharge::CompanyParams> cs;
  for (double n : {194.0, 181.0, 157.0}) {
    Diagonal d(4);
    Vector f(4);
    for (int j = 0; j < 4; ++j) {
      d[j] = n * (30 + 10 * u(rng));
      f[j] = n * (-80 + 20 * u(rng));
    }
    cs.push_back(fleetcharge::CompanyParams::make(n, d, f, st));
  }
  auto obj = fleetcharge::GovernmentObjective::from_set_point(2.5 * st.queue_cost, (Vector(4) << 198, 103, 144, 87).finished());
  return fleetcharge::GameInstance{st, std::move(cs), std::move(obj)};
}

/// Every vehicle reaches every station.
inline std::vector<fleetcharge::AdmissiblePolytope> generous_sets(const fleetcharge::GameInstance& g) {
  std::vector<fleetcharge::AdmissiblePolytope> out;
  for (const auto& c : g.companies)
    out.push_back(fleetcharge::admissible_polytope(
        fleetcharge::FleetReachability::complete(g.num_stations(), static_cast<std::size_t>(c.fleet))));
  return out;
}

inline Vector random_profile(const std::vector<fleetcharge::AdmissiblePolytope>& sets, std::mt19937_64& rng,
                             double spread = 1.0) {
  const auto m = static_cast<Eigen::Index>(sets[0].num_stations());
  std::normal_distribution<double> g(0.0, spread);
  Vector x(m * static_cast<Eigen::Index>(sets.size()));
  for (std::size_t i = 0; i < sets.size(); ++i) {
    Vector y(m);
    for (auto& v : y) v = 1.0 / static_cast<double>(m) + g(rng);
    x.segment(static_cast<Eigen::Index>(i) * m, m) = fleetcharge::project(y, sets[i]);
  }
  return x;
}

}  // namespace testing_support
