// Lower level on its own: five drivers, two stations, a target split, and
// the surge prices that make the drivers choose it.

#include <cstdio>

#include "fleetcharge.hpp"

using namespace fleetcharge;

int main() {
  std::vector<DriverParams> drivers;
  const double battery_need[] = {40, 42, 45, 47, 50};
  for (double d : battery_need) {
    DriverParams v;
    v.demand = (Diagonal(2) << d, d + 3).finished();
    v.base = (Vector(2) << -30, -10).finished();  // station 1 sits in the busier region
    v.gain = (Diagonal(2) << 14, 4).finished();
    v.reach = full_mask(2);
    v.horizon = 2;
    drivers.push_back(v);
  }
  const Vector price = (Vector(2) << 3.0, 2.5).finished();
  const DiscreteAllocation target = {2, 3};

  const auto sol = two_step(drivers, price, Vector::Zero(2), target);
  std::printf("mode %s (%s), J_M = %g\n", to_string(sol.mode), sol.solver.c_str(), sol.cost);
  for (std::size_t v = 0; v < drivers.size(); ++v)
    std::printf("driver %zu -> station %zu, rho = (%.3f, %.3f)\n", v + 1, sol.assignment[v] + 1, sol.rho[v][0],
                sol.rho[v][1]);
}
