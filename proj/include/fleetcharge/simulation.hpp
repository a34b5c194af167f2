#pragma once

// Operating-period simulator and the estimators that turn its end state
// into game and driver parameters.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "feasible_sets.hpp"
#include "linalg.hpp"
#include "network.hpp"
#include "surge.hpp"

namespace fleetcharge {

// ---------------------------------------------------------------------------
// Traffic and battery.

/// Space-mean speed (km/h) for a network accumulation of n vehicles.
inline double mfd_speed(double n) {
  if (!(n >= 0)) throw InvalidParameter("accumulation must be nonnegative");
  const double k = n / 1000.0;
  if (k <= 36) return 36.0 * std::exp(-29.0 * k / 600.0);
  if (k <= 60) return std::max(0.0, 6.31 - 0.28 * (k - 36.0));
  return 0.0;
}

struct VehicleState {
  std::size_t company = 0;
  std::size_t node = 0;
  double battery = 100;  // %
  double desired = 100;  // %
  double range_km = 300;
  double threshold = 0;  // %
  double beta = 1;       // charge units per %
  double traveled_km = 0;

  bool needs_charge() const { return battery < threshold; }
};

/// Battery after driving `km`; only driven distance drains.
inline VehicleState drive(VehicleState s, double km) {
  s.battery = std::max(0.0, s.battery - 100.0 / s.range_km * km);
  s.traveled_km += km;
  return s;
}

inline VehicleState discharge_step(const VehicleState& s, double speed_kmh, double dt_h) {
  if (!(dt_h > 0)) throw InvalidParameter("time step must be positive");
  return drive(s, speed_kmh * dt_h);
}

// ---------------------------------------------------------------------------
// Demand.

struct DemandRequest {
  double time_s = 0;
  std::size_t origin = 0, dest = 0;  // node indices
};

/// Rows "time_s origin_node dest_node" with node ids; '#' comments.
inline std::vector<DemandRequest> parse_demand(std::istream& in, const RoadNetwork& net) {
  std::vector<DemandRequest> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string first;
    if (!(std::istringstream(line) >> first)) continue;
    double t;
    long o, d;
    std::string extra;
    if (!(ss >> t >> o >> d) || (ss >> extra)) throw ParseError("demand line " + std::to_string(lineno) + ": expected time_s origin dest");
    if (!(t >= 0) || !std::isfinite(t)) throw ParseError("demand line " + std::to_string(lineno) + ": negative time");
    try {
      out.push_back({t, net.index_of(o), net.index_of(d)});
    } catch (const ParseError& e) {
      throw ParseError("demand line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.time_s < b.time_s; });
  return out;
}

/// Poisson arrivals; origins drawn by region weight then uniformly inside
/// the region, destinations uniformly over all other nodes.
inline std::vector<DemandRequest> generate_demand(const RoadNetwork& net, const std::vector<int>& regions,
                                                  double rate_per_hour, const std::vector<double>& region_weights,
                                                  double duration_h, std::uint64_t seed) {
  if (!(rate_per_hour >= 0)) throw InvalidParameter("demand rate must be nonnegative");
  std::vector<DemandRequest> out;
  if (rate_per_hour == 0 || net.num_nodes() < 2) return out;
  std::vector<std::vector<std::size_t>> members(region_weights.size());
  for (std::size_t u = 0; u < regions.size(); ++u)
    if (regions[u] >= 0 && static_cast<std::size_t>(regions[u]) < members.size()) members[static_cast<std::size_t>(regions[u])].push_back(u);
  std::vector<double> w = region_weights;
  for (std::size_t k = 0; k < w.size(); ++k)
    if (members[k].empty()) w[k] = 0;
  if (std::accumulate(w.begin(), w.end(), 0.0) <= 0) throw InvalidParameter("no region can generate demand");
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(rate_per_hour / 3600.0);
  std::discrete_distribution<std::size_t> pick_region(w.begin(), w.end());
  for (double t = gap(rng); t < duration_h * 3600.0; t += gap(rng)) {
    const auto& cell = members[pick_region(rng)];
    const std::size_t o = cell[rng() % cell.size()];
    std::size_t d = rng() % (net.num_nodes() - 1);
    if (d >= o) ++d;
    out.push_back({t, o, d});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Simulation.

struct SimulationParams {
  double duration_h = 3;
  double step_s = 30;
  double pickup_limit_min = 10;
  double background_accumulation = 12000;  // private traffic already on the road
  double initial_battery_lo = 90, initial_battery_hi = 95;
  double threshold_lo = 55, threshold_hi = 60;
  double range_lo_km = 140, range_hi_km = 160;
  double beta = 1;
  double desired_battery = 100;

  void validate() const {
    if (!(duration_h > 0)) throw InvalidParameter("duration must be positive");
    if (!(step_s > 0)) throw InvalidParameter("time step must be positive");
    if (!(pickup_limit_min >= 0)) throw InvalidParameter("pickup limit must be nonnegative");
    if (!(background_accumulation >= 0)) throw InvalidParameter("background accumulation must be nonnegative");
    if (!(initial_battery_lo <= initial_battery_hi && initial_battery_lo >= 0 && initial_battery_hi <= 100))
      throw InvalidParameter("initial battery range must lie in [0, 100]");
    if (!(threshold_lo <= threshold_hi)) throw InvalidParameter("threshold range reversed");
    if (!(range_lo_km > 0 && range_lo_km <= range_hi_km)) throw InvalidParameter("vehicle range must be positive");
  }
};

struct FleetSnapshot {
  std::vector<VehicleState> vehicles;
  std::vector<long> needing;           // N_i
  std::vector<double> region_requests;  // request origins per station region
  std::vector<double> speed_trace;      // km/h per step
  std::size_t served = 0, unserved = 0;

  std::vector<std::size_t> needing_vehicles(std::size_t company) const {
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < vehicles.size(); ++v)
      if (vehicles[v].company == company && vehicles[v].needs_charge()) out.push_back(v);
    return out;
  }
};

inline FleetSnapshot simulate_period(const DistanceTable& table, const std::vector<int>& regions,
                                     std::size_t num_regions, const std::vector<std::size_t>& fleet_sizes,
                                     const SimulationParams& p, const std::vector<DemandRequest>& demand,
                                     std::uint64_t seed) {
  p.validate();
  const std::size_t nodes = table.size();
  if (nodes == 0) throw InvalidParameter("empty network");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

  enum class Phase { Idle, Pickup, Carry };
  struct Live {
    Phase phase = Phase::Idle;
    std::size_t from = 0, to = 0, dest = 0;
    double done_km = 0;
  };
  FleetSnapshot snap;
  snap.region_requests.assign(num_regions, 0.0);
  for (std::size_t c = 0; c < fleet_sizes.size(); ++c)
    for (std::size_t k = 0; k < fleet_sizes[c]; ++k) {
      VehicleState s;
      s.company = c;
      s.node = rng() % nodes;
      s.battery = between(p.initial_battery_lo, p.initial_battery_hi);
      s.threshold = between(p.threshold_lo, p.threshold_hi);
      s.range_km = between(p.range_lo_km, p.range_hi_km);
      s.beta = p.beta;
      s.desired = p.desired_battery;
      snap.vehicles.push_back(s);
    }
  std::vector<Live> live(snap.vehicles.size());
  // Seeded scan order so ties in the nearest-idle search do not favour any company.
  std::vector<std::size_t> order(live.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> private_end;

  const double dt_h = p.step_s / 3600.0;
  const auto steps = static_cast<std::size_t>(std::ceil(p.duration_h * 3600.0 / p.step_s - 1e-9));
  std::size_t next_request = 0;
  for (std::size_t step = 0; step < steps; ++step) {
    const double t0 = static_cast<double>(step) * p.step_s, t1 = t0 + p.step_s;
    std::size_t moving = 0;
    for (const auto& l : live) moving += l.phase != Phase::Idle;
    const auto active_private = static_cast<std::size_t>(
        std::count_if(private_end.begin(), private_end.end(), [&](double e) { return e > t0; }));
    const double speed = mfd_speed(p.background_accumulation + static_cast<double>(moving + active_private));
    snap.speed_trace.push_back(speed);

    for (; next_request < demand.size() && demand[next_request].time_s < t1; ++next_request) {
      const auto& r = demand[next_request];
      if (r.origin >= nodes || r.dest >= nodes) throw InvalidParameter("demand refers to a node outside the network");
      if (regions.at(r.origin) >= 0) snap.region_requests[static_cast<std::size_t>(regions[r.origin])] += 1;
      std::size_t best = live.size();
      double best_km = kUnreachable;
      for (std::size_t v : order) {
        if (live[v].phase != Phase::Idle) continue;
        const double km = table.km(snap.vehicles[v].node, r.origin);
        if (km < best_km) {
          best_km = km;
          best = v;
        }
      }
      const double wait_min = best_km == 0 ? 0.0 : (speed > 0 ? best_km / speed * 60.0 : kUnreachable);
      if (best < live.size() && wait_min <= p.pickup_limit_min && std::isfinite(table.km(r.origin, r.dest))) {
        live[best] = {Phase::Pickup, snap.vehicles[best].node, r.origin, r.dest, 0.0};
        ++snap.served;
      } else {
        const double trip = table.km(r.origin, r.dest);
        private_end.push_back(speed > 0 && std::isfinite(trip) ? r.time_s + trip / speed * 3600.0 : kUnreachable);
        ++snap.unserved;
      }
    }

    for (std::size_t v = 0; v < live.size(); ++v) {
      double budget = speed * dt_h;
      auto& l = live[v];
      while (l.phase != Phase::Idle && budget > 0) {
        const double left = table.km(l.from, l.to) - l.done_km;
        if (budget < left) {
          snap.vehicles[v] = drive(snap.vehicles[v], budget);
          l.done_km += budget;
          budget = 0;
          break;
        }
        snap.vehicles[v] = drive(snap.vehicles[v], left);
        budget -= left;
        snap.vehicles[v].node = l.to;
        if (l.phase == Phase::Pickup) {
          l = {Phase::Carry, l.to, l.dest, l.dest, 0.0};
        } else {
          l.phase = Phase::Idle;
        }
      }
    }
  }
  // Vehicles still on the road stop at the last node they passed.
  for (std::size_t v = 0; v < live.size(); ++v)
    if (live[v].phase != Phase::Idle) snap.vehicles[v].node = table.node_after(live[v].from, live[v].to, live[v].done_km);

  snap.needing.assign(fleet_sizes.size(), 0);
  for (const auto& s : snap.vehicles)
    if (s.needs_charge()) ++snap.needing[s.company];
  return snap;
}

// ---------------------------------------------------------------------------
// Feasibility.

struct CompanyFeasibility {
  std::vector<std::size_t> vehicles;       // snapshot indices of vehicles that need charge
  std::vector<StationMask> omega;          // Omega_v per listed vehicle
  std::vector<std::vector<double>> km;     // d_{v,k}
  FleetReachability reach() const {
    return FleetReachability(km.empty() ? 0 : km[0].size(), omega);
  }
};

/// Station k is feasible for v when s_v - (100 / d_max) d_{v,k} > 0.
inline bool station_feasible(const VehicleState& s, double km) {
  return std::isfinite(km) && s.battery - 100.0 / s.range_km * km > 0;
}

inline std::vector<CompanyFeasibility> compute_feasibility(const FleetSnapshot& snap, const DistanceTable& table,
                                                           const std::vector<std::size_t>& station_nodes,
                                                           std::size_t companies) {
  const std::size_t m = station_nodes.size();
  if (m == 0 || m > kMaxStations) throw InvalidParameter("station count out of range");
  std::vector<CompanyFeasibility> out(companies);
  for (std::size_t c = 0; c < companies; ++c) {
    for (std::size_t v : snap.needing_vehicles(c)) {
      const auto& s = snap.vehicles[v];
      std::vector<double> d(m);
      StationMask mask = 0;
      for (std::size_t k = 0; k < m; ++k) {
        d[k] = table.km(s.node, station_nodes[k]);
        if (station_feasible(s, d[k])) mask |= StationMask{1} << k;
      }
      if (mask == 0)
        throw DegenerateInput("vehicle " + std::to_string(v) + " of company " + std::to_string(c) +
                              " cannot reach any station");
      out[c].vehicles.push_back(v);
      out[c].omega.push_back(mask);
      out[c].km.push_back(std::move(d));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameter estimation.

struct RegionParams {
  Vector occupancy;            // P_k
  Vector desired;              // Z
  double phi = 300;            // expected-profit scale
  std::vector<double> idle_cost;  // u_i per company, $/km
  double daily_h = 8;          // T_daily
  double speed_estimate = 20;  // drivers' v_space estimate, km/h
  double horizon_h = 2;        // tau_v
  double profit_noise = 10;    // w_k ~ U[-a, a]
};

/// e_pro = phi Z + w with w_k ~ U[-a, a], one draw shared by all companies.
inline Vector expected_profit(const RegionParams& r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> w(-r.profit_noise, r.profit_noise);
  Vector e = r.phi * r.desired;
  for (auto& x : e) x += r.profit_noise > 0 ? w(rng) : 0.0;
  return e;
}

/// delta_{v,k} = beta (s_des - (s - (100 / d_max) d_{v,k})).
inline double charging_demand(const VehicleState& s, double km) {
  return s.beta * (s.desired - (s.battery - 100.0 / s.range_km * km));
}

struct CompanyEstimate {
  double fleet = 0;  // N_i
  Diagonal R, D;
  Vector e_arr, e_pro, f;
};

inline std::vector<CompanyEstimate> estimate_company_params(const FleetSnapshot& snap,
                                                            const std::vector<CompanyFeasibility>& feas,
                                                            const RegionParams& r, const Vector& e_pro) {
  const auto m = r.occupancy.size();
  if (r.idle_cost.size() < feas.size()) throw InvalidParameter("idle cost needed for every company");
  std::vector<CompanyEstimate> out;
  for (std::size_t c = 0; c < feas.size(); ++c) {
    const auto& fc = feas[c];
    CompanyEstimate e;
    e.fleet = static_cast<double>(fc.vehicles.size());
    if (e.fleet == 0) throw DegenerateInput("company " + std::to_string(c) + " has no vehicle to charge");
    e.R = Diagonal::Zero(m);
    e.e_arr = Vector::Zero(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      double sum_delta = 0, sum_km = 0, count = 0;
      for (std::size_t a = 0; a < fc.vehicles.size(); ++a) {
        if (!has_station(fc.omega[a], static_cast<std::size_t>(k))) continue;
        const double km = fc.km[a][static_cast<std::size_t>(k)];
        sum_delta += charging_demand(snap.vehicles[fc.vehicles[a]], km);
        sum_km += km;
        count += 1;
      }
      if (count == 0) continue;
      e.R[k] = sum_delta / count;
      e.e_arr[k] = r.idle_cost[c] * r.occupancy[k] * sum_km / count;
    }
    e.D = e.fleet * e.R;
    e.e_pro = e_pro;
    e.f = e.fleet * (e.e_arr - e.e_pro);
    out.push_back(std::move(e));
  }
  return out;
}

/// D_v = diag(delta_{v,k}), g_v = e_arr - (tau / T_daily) e_pro,
/// H_v = tau v_space P.
inline std::vector<std::vector<DriverParams>> estimate_driver_params(const FleetSnapshot& snap,
                                                                     const std::vector<CompanyFeasibility>& feas,
                                                                     const RegionParams& r,
                                                                     const std::vector<CompanyEstimate>& est) {
  const auto m = r.occupancy.size();
  std::vector<std::vector<DriverParams>> out(feas.size());
  for (std::size_t c = 0; c < feas.size(); ++c)
    for (std::size_t a = 0; a < feas[c].vehicles.size(); ++a) {
      const auto& s = snap.vehicles[feas[c].vehicles[a]];
      DriverParams d;
      d.reach = feas[c].omega[a];
      d.horizon = r.horizon_h;
      d.demand = Diagonal::Zero(m);
      for (Eigen::Index k = 0; k < m; ++k)
        if (has_station(d.reach, static_cast<std::size_t>(k))) d.demand[k] = charging_demand(s, feas[c].km[a][static_cast<std::size_t>(k)]);
      d.base = est[c].e_arr - (r.horizon_h / r.daily_h) * est[c].e_pro;
      d.gain = r.horizon_h * r.speed_estimate * r.occupancy;
      out[c].push_back(std::move(d));
    }
  return out;
}

/// Z from the share of request origins per station region.
inline Vector request_distribution(const FleetSnapshot& snap) {
  Vector z = Eigen::Map<const Vector>(snap.region_requests.data(), static_cast<Eigen::Index>(snap.region_requests.size()));
  const double total = z.sum();
  if (!(total > 0)) throw DegenerateInput("no requests observed; cannot form the desired distribution");
  return z / total;
}

}  // namespace fleetcharge
