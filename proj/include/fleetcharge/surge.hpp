#pragma once

// Lower level: steering individual drivers to the stations picked by the
// company through per-region surge supplements.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "errors.hpp"
#include "feasible_sets.hpp"
#include "linalg.hpp"

namespace fleetcharge {

/// Driver cost at station k: D_kk p_k + g_k - H_kk rho_k over k in Omega_v.
struct DriverParams {
  Diagonal demand;  // D_v
  Vector base;      // g_v
  Diagonal gain;    // H_v
  StationMask reach = 0;
  double horizon = 0;  // tau_v, hours

  std::size_t num_stations() const { return static_cast<std::size_t>(demand.size()); }

  void validate() const {
    const auto m = demand.size();
    require_size(base, m, "g_v");
    require_size(gain, m, "H_v");
    if ((demand.array() < 0).any()) throw InvalidParameter("D_v must be nonnegative");
    if ((gain.array() < 0).any()) throw InvalidParameter("H_v must be nonnegative");
    if (reach == 0) throw DegenerateInput("driver with no reachable station");
    for (Eigen::Index k = 0; k < m; ++k)
      if ((demand[k] > 0) != has_station(reach, static_cast<std::size_t>(k)))
        throw InvalidParameter("D_v must be positive exactly on reachable stations");
  }

  /// alpha_k = D_kk p_k + g_k, the surge-free part of the cost.
  Vector base_cost(const Vector& price) const { return demand.cwiseProduct(price) + base; }
};

enum class SurgeMode { EqualPrice, PerVehicle };

inline const char* to_string(SurgeMode m) { return m == SurgeMode::EqualPrice ? "equal-price" : "per-vehicle"; }

struct SurgeSolution {
  SurgeMode mode = SurgeMode::PerVehicle;
  std::string solver;                  // how the prices were found
  std::vector<std::size_t> assignment;  // realised best response per vehicle
  std::vector<Vector> rho;              // per vehicle; identical in equal-price mode
  DiscreteAllocation counts;            // sigma(mu)
  double cost = 0;                      // J_M
  std::size_t evaluations = 0;
};

struct SurgeOptions {
  double margin = 1e-6;
  std::optional<double> cap;          // off by default
  std::size_t class_limit = 100000;   // exact equal-price enumeration limit
  std::size_t budget = 20000;         // local-search evaluations
  std::uint64_t seed = 1;
};

inline void check_drivers(const std::vector<DriverParams>& drivers, std::size_t m) {
  for (const auto& d : drivers) {
    if (d.num_stations() != m) throw DimensionMismatch("driver parameters do not match station count");
    d.validate();
  }
}

inline FleetReachability reachability(const std::vector<DriverParams>& drivers, std::size_t m) {
  std::vector<StationMask> masks;
  masks.reserve(drivers.size());
  for (const auto& d : drivers) masks.push_back(d.reach);
  return FleetReachability(m, std::move(masks));
}

inline double matching_cost(const DiscreteAllocation& counts, const DiscreteAllocation& n) {
  double s = 0;
  for (std::size_t j = 0; j < n.size(); ++j) {
    const double e = static_cast<double>(counts[j] - n[j]);
    s += e * e;
  }
  return 0.5 * s;
}

// ---------------------------------------------------------------------------
// Matching.

/// Vehicles to stations with exactly n_j vehicles at station j, by
/// augmenting paths on the capacitated bipartite graph.
inline std::vector<std::size_t> assign_vehicles(const DiscreteAllocation& n, const FleetReachability& fleet) {
  const std::size_t m = fleet.num_stations();
  if (n.size() != m) throw DimensionMismatch("allocation length");
  if (!hall_condition(n, fleet)) throw InfeasibleTarget("allocation violates the matching condition");
  const std::size_t vehicles = fleet.num_vehicles();
  constexpr std::size_t none = static_cast<std::size_t>(-1);
  std::vector<std::size_t> of_vehicle(vehicles, none);
  std::vector<std::vector<std::size_t>> at(m);

  // Breadth-first search for a shortest augmenting path from vehicle v.
  auto augment = [&](std::size_t v) {
    std::vector<std::size_t> from_station(m, none);  // vehicle that moves into the station
    std::vector<std::size_t> from_vehicle(vehicles, none);  // station the vehicle was displaced from
    std::vector<char> seen(m, 0);
    std::vector<std::size_t> queue{v};
    from_vehicle[v] = m;  // root marker
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const std::size_t u = queue[head];
      for (std::size_t j = 0; j < m; ++j) {
        if (!has_station(fleet.reachable(u), j) || seen[j] || j == of_vehicle[u]) continue;
        seen[j] = 1;
        from_station[j] = u;
        if (static_cast<long>(at[j].size()) < n[j]) {
          // Walk back, moving each vehicle on the path one station along.
          std::size_t station = j;
          for (;;) {
            const std::size_t w = from_station[station];
            const std::size_t prev = of_vehicle[w];
            if (prev != none) at[prev].erase(std::find(at[prev].begin(), at[prev].end(), w));
            of_vehicle[w] = station;
            at[station].push_back(w);
            if (w == v) return true;
            station = prev;
          }
        }
        for (std::size_t w : at[j])
          if (from_vehicle[w] == none) {
            from_vehicle[w] = j;
            queue.push_back(w);
          }
      }
    }
    return false;
  };
  for (std::size_t v = 0; v < vehicles; ++v)
    if (!augment(v)) throw InternalError("matching failed although the condition holds");
  return of_vehicle;
}

// ---------------------------------------------------------------------------
// Driver response.

/// argmin over Omega_v of the driver cost; ties go to the lowest index.
inline std::size_t driver_best_response(const DriverParams& d, const Vector& rho, const Vector& price) {
  if (d.reach == 0) throw DegenerateInput("driver with no reachable station");
  if ((rho.array() < 0).any()) throw InvalidParameter("surge prices must be nonnegative");
  const Vector alpha = d.base_cost(price);
  std::size_t best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < d.num_stations(); ++k) {
    if (!has_station(d.reach, k)) continue;
    const auto kk = static_cast<Eigen::Index>(k);
    const double c = alpha[kk] - d.gain[kk] * rho[kk];
    if (c < best_cost) {
      best_cost = c;
      best = k;
    }
  }
  return best;
}

inline void realise(SurgeSolution& sol, const std::vector<DriverParams>& drivers, const Vector& price,
                    const DiscreteAllocation& n) {
  sol.counts.assign(n.size(), 0);
  sol.assignment.resize(drivers.size());
  for (std::size_t v = 0; v < drivers.size(); ++v) {
    sol.assignment[v] = driver_best_response(drivers[v], sol.rho[v], price);
    ++sol.counts[sol.assignment[v]];
  }
  sol.cost = matching_cost(sol.counts, n);
}

/// Recomputes every best response under the solution's prices.
inline bool verify_zero_cost(const SurgeSolution& sol, const std::vector<DriverParams>& drivers, const Vector& price,
                             const DiscreteAllocation& n) {
  if (sol.rho.size() != drivers.size()) return false;
  DiscreteAllocation counts(n.size(), 0);
  for (std::size_t v = 0; v < drivers.size(); ++v) ++counts[driver_best_response(drivers[v], sol.rho[v], price)];
  return counts == n;
}

// ---------------------------------------------------------------------------
// Per-vehicle prices.

/// Smallest surge at the target making it strictly preferred, with every
/// other entry at its floor.
inline Vector per_vehicle_rho(const DriverParams& d, std::size_t target, const Vector& price, const Vector& rho_min,
                              double margin, std::optional<double> cap = std::nullopt) {
  if (!has_station(d.reach, target)) throw InvalidParameter("target station not reachable by the driver");
  const Vector alpha = d.base_cost(price);
  const auto t = static_cast<Eigen::Index>(target);
  Vector rho = rho_min;
  double need = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < d.num_stations(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (j == target || !has_station(d.reach, j)) continue;
    // b_t rho_t > b_j rho_j - (alpha_j - alpha_t)
    need = std::max(need, d.gain[jj] * rho[jj] - (alpha[jj] - alpha[t]));
  }
  if (d.gain[t] * rho_min[t] > need) return rho;  // already strictly preferred
  if (d.gain[t] <= 0) throw ZeroGain("surge at the target station has no effect on this driver");
  rho[t] = std::max(rho_min[t], need / d.gain[t]) + margin;
  if (cap) rho[t] = std::min(rho[t], std::max(*cap, rho_min[t]));
  return rho;
}

inline SurgeSolution per_vehicle_prices(const std::vector<DriverParams>& drivers,
                                        const std::vector<std::size_t>& assignment, const Vector& price,
                                        const Vector& rho_min, const DiscreteAllocation& n,
                                        const SurgeOptions& opt = {}) {
  if (assignment.size() != drivers.size()) throw DimensionMismatch("one station per vehicle");
  SurgeSolution sol;
  sol.mode = SurgeMode::PerVehicle;
  sol.solver = "per-vehicle";
  sol.rho.reserve(drivers.size());
  for (std::size_t v = 0; v < drivers.size(); ++v)
    sol.rho.push_back(per_vehicle_rho(drivers[v], assignment[v], price, rho_min, opt.margin, opt.cap));
  realise(sol, drivers, price, n);
  return sol;
}

// ---------------------------------------------------------------------------
// Equal prices.

namespace detail {

/// Phase-one simplex (Bland's rule) for {z >= 0 : A z <= b}.
inline std::optional<Vector> feasible_point(const Matrix& A, const Vector& b, double tol = 1e-9) {
  const Eigen::Index rows = A.rows(), n = A.cols(), cols = n + 2 * rows;
  Matrix T = Matrix::Zero(rows, cols + 1);
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(rows));
  Vector cost = Vector::Zero(cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double sign = b[i] < 0 ? -1.0 : 1.0;
    T.row(i).head(n) = sign * A.row(i);
    T(i, n + i) = sign;
    T(i, n + rows + i) = 1;
    T(i, cols) = sign * b[i];
    basis[static_cast<std::size_t>(i)] = sign > 0 ? n + i : n + rows + i;
    if (sign < 0) cost[n + rows + i] = 1;
  }
  const double scale = 1.0 + (rows > 0 ? b.cwiseAbs().maxCoeff() : 0.0);
  for (Eigen::Index iter = 0; iter < 50 * (rows + cols); ++iter) {
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < n + rows && enter < 0; ++j) {
      double r = cost[j];
      for (Eigen::Index i = 0; i < rows; ++i) r -= cost[basis[static_cast<std::size_t>(i)]] * T(i, j);
      if (r < -tol) enter = j;
    }
    if (enter < 0) break;
    Eigen::Index leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (T(i, enter) <= tol) continue;
      const double ratio = T(i, cols) / T(i, enter);
      if (ratio < best - 1e-15 ||
          (ratio <= best + 1e-15 && leave >= 0 && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
        best = ratio;
        leave = i;
      }
    }
    if (leave < 0) break;  // unbounded direction; phase one is bounded below so this cannot improve
    T.row(leave) /= T(leave, enter);
    for (Eigen::Index i = 0; i < rows; ++i)
      if (i != leave && T(i, enter) != 0) T.row(i) -= T(i, enter) * T.row(leave);
    basis[static_cast<std::size_t>(leave)] = enter;
  }
  double infeasibility = 0;
  Vector z = Vector::Zero(n);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::Index bi = basis[static_cast<std::size_t>(i)];
    if (bi >= n + rows) infeasibility += T(i, cols);
    if (bi < n) z[bi] = T(i, cols);
  }
  if (infeasibility > tol * scale) return std::nullopt;
  if (((A * z - b).array() > tol * scale).any()) return std::nullopt;
  return z;
}

struct DriverClass {
  Vector alpha;
  Diagonal gain;
  StationMask reach;
  long count;
  std::vector<std::size_t> stations;
};

inline std::vector<DriverClass> group_drivers(const std::vector<DriverParams>& drivers, const Vector& price) {
  std::vector<DriverClass> out;
  std::map<std::tuple<std::vector<double>, std::vector<double>, StationMask>, std::size_t> index;
  for (const auto& d : drivers) {
    const Vector alpha = d.base_cost(price);
    auto key = std::make_tuple(std::vector<double>(alpha.data(), alpha.data() + alpha.size()),
                               std::vector<double>(d.gain.data(), d.gain.data() + d.gain.size()), d.reach);
    auto [it, fresh] = index.emplace(std::move(key), out.size());
    if (fresh) {
      DriverClass c{alpha, d.gain, d.reach, 0, {}};
      for (std::size_t j = 0; j < d.num_stations(); ++j)
        if (has_station(d.reach, j)) c.stations.push_back(j);
      out.push_back(std::move(c));
    }
    ++out[it->second].count;
  }
  return out;
}

inline DiscreteAllocation counts_for(const std::vector<std::size_t>& drivers_choice, std::size_t m) {
  DiscreteAllocation c(m, 0);
  for (std::size_t s : drivers_choice) ++c[s];
  return c;
}

}  // namespace detail

/// J_M reached when every driver faces the same surge vector rho.
inline double equal_price_cost(const std::vector<DriverParams>& drivers, const Vector& rho, const Vector& price,
                               const DiscreteAllocation& n) {
  DiscreteAllocation counts(n.size(), 0);
  for (const auto& d : drivers) ++counts[driver_best_response(d, rho, price)];
  return matching_cost(counts, n);
}

/// Exact search over best-response patterns: identical drivers respond
/// identically to a common rho, so a pattern is one station per class.
/// Patterns are visited in order of their J_M and the first one whose
/// inequality system is feasible wins. Returns nullopt above the limit.
inline std::optional<SurgeSolution> equal_price_exact(const std::vector<DriverParams>& drivers, const Vector& price,
                                                      const Vector& rho_min, const DiscreteAllocation& n,
                                                      const SurgeOptions& opt = {}) {
  const std::size_t m = n.size();
  const auto classes = detail::group_drivers(drivers, price);
  double total = 1;
  for (const auto& c : classes) total *= static_cast<double>(c.stations.size());
  if (total > static_cast<double>(opt.class_limit)) return std::nullopt;

  const auto patterns = static_cast<std::size_t>(total);
  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(patterns);
  std::vector<std::size_t> pick(classes.size());
  auto decode = [&](std::size_t code) {
    for (std::size_t c = 0; c < classes.size(); ++c) {
      pick[c] = classes[c].stations[code % classes[c].stations.size()];
      code /= classes[c].stations.size();
    }
  };
  for (std::size_t code = 0; code < patterns; ++code) {
    decode(code);
    DiscreteAllocation counts(m, 0);
    for (std::size_t c = 0; c < classes.size(); ++c) counts[pick[c]] += classes[c].count;
    order.emplace_back(matching_cost(counts, n), code);
  }
  std::sort(order.begin(), order.end());

  SurgeSolution sol;
  sol.mode = SurgeMode::EqualPrice;
  sol.solver = "equal-price exact";
  const auto mm = static_cast<Eigen::Index>(m);
  for (const auto& [jm, code] : order) {
    ++sol.evaluations;
    decode(code);
    // Unknown z = rho - rho_min >= 0. For class c choosing s, every other
    // reachable k: H_k rho_k - H_s rho_s <= alpha_k - alpha_s - 2 margin.
    std::vector<Vector> rows;
    std::vector<double> rhs;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      const auto& cl = classes[c];
      const auto s = static_cast<Eigen::Index>(pick[c]);
      for (std::size_t k : cl.stations) {
        const auto kk = static_cast<Eigen::Index>(k);
        if (kk == s) continue;
        Vector row = Vector::Zero(mm);
        row[kk] += cl.gain[kk];
        row[s] -= cl.gain[s];
        rows.push_back(row);
        rhs.push_back(cl.alpha[kk] - cl.alpha[s] - 2 * opt.margin - row.dot(rho_min));
      }
    }
    if (opt.cap)
      for (Eigen::Index j = 0; j < mm; ++j) {
        Vector row = Vector::Zero(mm);
        row[j] = 1;
        rows.push_back(row);
        rhs.push_back(std::max(*opt.cap, rho_min[j]) - rho_min[j]);
      }
    Matrix A(static_cast<Eigen::Index>(rows.size()), mm);
    Vector b(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      A.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
      b[static_cast<Eigen::Index>(r)] = rhs[r];
    }
    const auto z = detail::feasible_point(A, b);
    if (!z) continue;
    const Vector rho = rho_min + z->cwiseMax(0.0);
    sol.rho.assign(drivers.size(), rho);
    realise(sol, drivers, price, n);
    // Guard against rounding: accept only if the realised pattern is as good.
    if (sol.cost <= jm) return sol;
  }
  // Always feasible at rho_min up to ties; fall back to it.
  sol.rho.assign(drivers.size(), rho_min);
  realise(sol, drivers, price, n);
  return sol;
}

/// Coordinate search over a common rho. Along one coordinate J_M is
/// piecewise constant with one breakpoint per driver, so each sweep tests
/// every interval. Random restarts use the remaining budget.
inline SurgeSolution equal_price_search(const std::vector<DriverParams>& drivers, const Vector& price,
                                        const Vector& rho_min, const DiscreteAllocation& n,
                                        const SurgeOptions& opt = {}) {
  const std::size_t m = n.size();
  std::mt19937_64 rng(opt.seed);
  std::size_t used = 0;
  auto eval = [&](const Vector& rho) {
    ++used;
    return equal_price_cost(drivers, rho, price, n);
  };
  std::vector<Vector> alpha;
  for (const auto& d : drivers) alpha.push_back(d.base_cost(price));
  const double upper = opt.cap ? *opt.cap : std::numeric_limits<double>::infinity();

  auto descend = [&](Vector rho, double& value) {
    bool improved = true;
    while (improved && used < opt.budget && value > 0) {
      improved = false;
      for (std::size_t k = 0; k < m && used < opt.budget; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        std::vector<double> breaks;
        for (std::size_t v = 0; v < drivers.size(); ++v) {
          const auto& d = drivers[v];
          if (!has_station(d.reach, k) || d.gain[kk] <= 0) continue;
          double other = std::numeric_limits<double>::infinity();
          for (std::size_t j = 0; j < m; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            if (j != k && has_station(d.reach, j)) other = std::min(other, alpha[v][jj] - d.gain[jj] * rho[jj]);
          }
          if (std::isinf(other)) continue;
          const double t = (alpha[v][kk] - other) / d.gain[kk];
          if (t > rho_min[kk] && t < upper) breaks.push_back(t);
        }
        std::sort(breaks.begin(), breaks.end());
        breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
        std::vector<double> candidates{rho_min[kk]};
        for (std::size_t b = 0; b + 1 < breaks.size(); ++b) candidates.push_back(0.5 * (breaks[b] + breaks[b + 1]));
        if (!breaks.empty()) {
          candidates.push_back(0.5 * (rho_min[kk] + breaks.front()));
          candidates.push_back(std::min(breaks.back() + 1.0, 0.5 * (breaks.back() + upper)));
        }
        for (double c : candidates) {
          if (used >= opt.budget) break;
          Vector trial = rho;
          trial[kk] = c;
          const double f = eval(trial);
          if (f < value) {
            value = f;
            rho = trial;
            improved = true;
          }
        }
      }
    }
    return rho;
  };

  SurgeSolution sol;
  sol.mode = SurgeMode::EqualPrice;
  sol.solver = "equal-price search";
  double best_value = eval(rho_min);
  Vector best = descend(rho_min, best_value);
  double scale = 1;
  for (const auto& a : alpha) scale = std::max(scale, a.cwiseAbs().maxCoeff());
  std::exponential_distribution<double> jump(1.0);
  while (used < opt.budget && best_value > 0) {
    Vector start = best;
    for (Eigen::Index j = 0; j < start.size(); ++j)
      if (rng() % 2) start[j] = std::min(rho_min[j] + scale * jump(rng) / 4, std::max(upper, rho_min[j]));
    double value = eval(start);
    const Vector local = descend(start, value);
    if (value < best_value) {
      best_value = value;
      best = local;
    }
  }
  sol.rho.assign(drivers.size(), best);
  realise(sol, drivers, price, n);
  sol.evaluations = used;
  return sol;
}

inline SurgeSolution equal_price_solve(const std::vector<DriverParams>& drivers, const Vector& price,
                                       const Vector& rho_min, const DiscreteAllocation& n,
                                       const SurgeOptions& opt = {}) {
  check_drivers(drivers, n.size());
  require_size(price, static_cast<Eigen::Index>(n.size()), "p_i");
  require_size(rho_min, static_cast<Eigen::Index>(n.size()), "rho_min");
  if ((rho_min.array() < 0).any()) throw InvalidParameter("rho_min must be nonnegative");
  if (auto exact = equal_price_exact(drivers, price, rho_min, n, opt)) return *exact;
  return equal_price_search(drivers, price, rho_min, n, opt);
}

/// Equal prices first; per-vehicle prices when they leave J_M > 0.
inline SurgeSolution two_step(const std::vector<DriverParams>& drivers, const Vector& price, const Vector& rho_min,
                              const DiscreteAllocation& n, const SurgeOptions& opt = {}) {
  const std::size_t m = n.size();
  check_drivers(drivers, m);
  const auto fleet = reachability(drivers, m);
  if (!hall_condition(n, fleet)) throw InfeasibleTarget("allocation violates the matching condition");
  SurgeSolution eq = equal_price_solve(drivers, price, rho_min, n, opt);
  if (eq.cost == 0) return eq;
  const auto target = assign_vehicles(n, fleet);
  SurgeSolution pv = per_vehicle_prices(drivers, target, price, rho_min, n, opt);
  pv.evaluations = eq.evaluations;
  return pv;
}

}  // namespace fleetcharge
