// Three companies, four stations, hand-written parameters: compare uniform
// prices with system optimal pricing policies.

#include <cstdio>

#include "fleetcharge.hpp"

using namespace fleetcharge;

int main() {
  StationSet st{(Vector(4) << 15, 60, 35, 50).finished(), 0.1 * (Diagonal(4) << 4, 1, 3, 2).finished()};
  const double fleets[] = {120, 90, 60};
  std::vector<CompanyParams> companies;
  for (double n : fleets) {
    const Diagonal r = (Diagonal(4) << 46, 44, 45, 47).finished();
    const Vector f = n * (Vector(4) << -110, -50, -80, -40).finished();
    companies.push_back(CompanyParams::make(n, n * r, f, st));
  }
  GameInstance g{st, std::move(companies), {}};
  const Vector z = (Vector(4) << 0.4, 0.2, 0.25, 0.15).finished();
  g.objective = GovernmentObjective::from_set_point(2.5 * st.queue_cost, setpoint_from_distribution(g.fleets(), z));

  // Every vehicle can reach every station.
  std::vector<AdmissiblePolytope> sets;
  for (double n : fleets) sets.push_back(admissible_polytope(FleetReachability::complete(4, static_cast<std::size_t>(n))));

  const auto uniform = solve_nash(fixed_price_game(g, Vector::Constant(4, 3.0)), sets, g.objective, default_start(sets));
  const auto rsg = solve_nash(pricing_game(g), sets, g.objective, default_start(sets));
  std::printf("uniform price 3.0: J_G = %.4f\n", uniform.government_cost.back());
  std::printf("pricing policies:  J_G = %.2e after %zu iterations\n", rsg.government_cost.back(), rsg.iterations);

  const auto prices = equilibrium_prices(g, rsg.solution);
  for (std::size_t i = 0; i < prices.size(); ++i) {
    std::printf("company %zu  x =", i + 1);
    for (int j = 0; j < 4; ++j) std::printf(" %.3f", rsg.solution[static_cast<Eigen::Index>(4 * i) + j]);
    std::printf("   p =");
    for (int j = 0; j < 4; ++j) std::printf(" %.3f", prices[i][j]);
    std::printf("\n");
  }
  const Vector s = rsg.sigma.back();
  std::printf("sigma = %.1f %.1f %.1f %.1f  (target %.1f %.1f %.1f %.1f)\n", s[0], s[1], s[2], s[3],
              (*g.objective.set_point)[0], (*g.objective.set_point)[1], (*g.objective.set_point)[2],
              (*g.objective.set_point)[3]);
}
