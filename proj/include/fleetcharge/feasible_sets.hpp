#pragma once

// Reachability structure of a fleet, Hall-condition checks, the admissible
// allocation polytope of each company, Euclidean projection onto it and
// rounding of continuous allocations into matchable integer allocations.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "linalg.hpp"

namespace fleetcharge {

/// Subset enumeration is exponential in the number of stations.
inline constexpr std::size_t kMaxStations = 20;

using StationMask = std::uint32_t;

inline StationMask full_mask(std::size_t m) {
  return m >= 32 ? ~StationMask{0} : (StationMask{1} << m) - 1;
}

inline bool has_station(StationMask s, std::size_t j) { return (s >> j) & 1u; }

/// Reachable stations of every vehicle of one company. F_j is the set of
/// vehicles whose mask contains j; Omega_v is the mask of vehicle v.
class FleetReachability {
 public:
  FleetReachability() = default;

  FleetReachability(std::size_t num_stations, std::vector<StationMask> reachable)
      : num_stations_(num_stations), reachable_(std::move(reachable)) {
    if (num_stations_ == 0) throw InvalidParameter("at least one station required");
    if (num_stations_ > kMaxStations)
      throw InvalidParameter("subset enumeration supports at most " +
                             std::to_string(kMaxStations) + " stations");
    const StationMask full = full_mask(num_stations_);
    for (std::size_t v = 0; v < reachable_.size(); ++v) {
      if (reachable_[v] & ~full) throw InvalidParameter("station index out of range");
      if (reachable_[v] == 0)
        throw DegenerateInput("vehicle " + std::to_string(v) + " reaches no station");
    }
  }

  static FleetReachability from_station_lists(
      std::size_t num_stations, const std::vector<std::vector<std::size_t>>& omega) {
    std::vector<StationMask> masks;
    masks.reserve(omega.size());
    for (const auto& stations : omega) {
      StationMask s = 0;
      for (std::size_t j : stations) {
        if (j >= num_stations) throw InvalidParameter("station index out of range");
        s |= StationMask{1} << j;
      }
      masks.push_back(s);
    }
    return FleetReachability(num_stations, std::move(masks));
  }

  /// Every vehicle reaches every station.
  static FleetReachability complete(std::size_t num_stations, std::size_t vehicles) {
    return FleetReachability(num_stations,
                             std::vector<StationMask>(vehicles, full_mask(num_stations)));
  }

  std::size_t num_stations() const { return num_stations_; }
  std::size_t num_vehicles() const { return reachable_.size(); }
  StationMask reachable(std::size_t v) const { return reachable_.at(v); }
  const std::vector<StationMask>& masks() const { return reachable_; }

  std::vector<std::size_t> vehicles_at(std::size_t j) const {
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < reachable_.size(); ++v)
      if (has_station(reachable_[v], j)) out.push_back(v);
    return out;
  }

  /// |union_{j in S} F_j| for every S, indexed by mask.
  std::vector<std::size_t> union_sizes() const {
    const std::size_t count = std::size_t{1} << num_stations_;
    // within[T] = number of vehicles whose reachable set lies inside T.
    std::vector<std::size_t> within(count, 0);
    for (StationMask r : reachable_) ++within[r];
    for (std::size_t j = 0; j < num_stations_; ++j)
      for (std::size_t t = 0; t < count; ++t)
        if (t & (std::size_t{1} << j)) within[t] += within[t ^ (std::size_t{1} << j)];
    const StationMask full = full_mask(num_stations_);
    std::vector<std::size_t> out(count);
    for (std::size_t s = 0; s < count; ++s) out[s] = reachable_.size() - within[full ^ s];
    return out;
  }

 private:
  std::size_t num_stations_ = 0;
  std::vector<StationMask> reachable_;
};

using DiscreteAllocation = std::vector<long>;

/// Hall's condition: sum_{j in S} n_j <= |union_{j in S} F_j| for all S.
inline bool hall_condition(const DiscreteAllocation& n, const FleetReachability& fleet) {
  const std::size_t m = fleet.num_stations();
  if (n.size() != m) throw DimensionMismatch("allocation length");
  if (std::any_of(n.begin(), n.end(), [](long v) { return v < 0; })) return false;
  const auto unions = fleet.union_sizes();
  std::vector<long> mass(unions.size(), 0);
  for (std::size_t s = 1; s < unions.size(); ++s) {
    const auto low = static_cast<std::size_t>(std::countr_zero(static_cast<StationMask>(s)));
    mass[s] = mass[s & (s - 1)] + n[low];
    if (mass[s] > static_cast<long>(unions[s])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Admissible polytope.

/// sum_{j in subset} x_j <= rhs.
struct SubsetConstraint {
  StationMask subset = 0;
  double rhs = 0;
};

class AdmissiblePolytope {
 public:
  AdmissiblePolytope() = default;

  /// The probability simplex with optional extra subset constraints.
  AdmissiblePolytope(std::size_t num_stations, std::vector<SubsetConstraint> constraints)
      : num_stations_(num_stations), constraints_(std::move(constraints)) {
    prune();
  }

  std::size_t num_stations() const { return num_stations_; }
  const std::vector<SubsetConstraint>& constraints() const { return constraints_; }
  /// Indices of constraints that are not implied by simpler ones.
  const std::vector<std::size_t>& binding() const { return binding_; }

  bool empty() const { return empty_; }
  void mark_empty() { empty_ = true; }

  bool contains(const Vector& x, double tol = 1e-9) const {
    if (static_cast<std::size_t>(x.size()) != num_stations_) return false;
    if (!on_simplex(x, tol)) return false;
    for (const auto& c : constraints_)
      if (subset_sum(x, c.subset) > c.rhs + tol) return false;
    return true;
  }

  static double subset_sum(const Vector& x, StationMask s) {
    double total = 0;
    while (s) {
      total += x[std::countr_zero(s)];
      s &= s - 1;
    }
    return total;
  }

 private:
  void prune() {
    binding_.clear();
    const std::size_t m = num_stations_;
    const StationMask full = full_mask(m);
    // Upper bounds from singletons and lower bounds from complements of singletons.
    std::vector<double> upper(m, 1.0), lower(m, 0.0);
    for (const auto& c : constraints_) {
      if (std::popcount(c.subset) == 1)
        upper[std::countr_zero(c.subset)] = std::min(upper[std::countr_zero(c.subset)], c.rhs);
      if (m > 1 && std::popcount(c.subset) == static_cast<int>(m) - 1)
        lower[std::countr_zero(full ^ c.subset)] =
            std::max(lower[std::countr_zero(full ^ c.subset)], 1.0 - c.rhs);
    }
    for (std::size_t k = 0; k < constraints_.size(); ++k) {
      const auto& c = constraints_[k];
      if (c.rhs >= 1.0) continue;
      const int size = std::popcount(c.subset);
      if (size > 1 && size < static_cast<int>(m) - 1) {
        double from_upper = 0, from_lower = 1.0;
        for (std::size_t j = 0; j < m; ++j) {
          if (has_station(c.subset, j)) from_upper += upper[j];
          else from_lower -= lower[j];
        }
        if (c.rhs >= std::min(from_upper, from_lower)) continue;
      }
      binding_.push_back(k);
    }
  }

  std::size_t num_stations_ = 0;
  std::vector<SubsetConstraint> constraints_;
  std::vector<std::size_t> binding_;
  bool empty_ = false;
};

// ---------------------------------------------------------------------------
// Euclidean projection: dual active-set method (Goldfarb-Idnani) specialised
// to an identity Hessian. Constraints are kept in the form n'z >= b.

struct ProjectionResult {
  Vector point;
  /// Multipliers of the simplex equality followed by the active inequalities.
  Vector multipliers;
  /// Active inequality ids: [0, m) are x_j >= 0, m + k is subset constraint k.
  std::vector<std::size_t> active;
  bool feasible = true;
};

namespace detail {

class ActiveSetProjector {
 public:
  explicit ActiveSetProjector(const AdmissiblePolytope& poly) : poly_(poly), m_(poly.num_stations()) {
    ids_.reserve(m_ + poly.binding().size());
    for (std::size_t j = 0; j < m_; ++j) ids_.push_back(j);
    for (std::size_t k : poly.binding()) ids_.push_back(m_ + k);
  }

  ProjectionResult run(const Vector& y) const {
    const auto m = static_cast<Eigen::Index>(m_);
    ProjectionResult res;
    Vector x = y;
    // Equality 1'x = 1 enters first with a full step along 1.
    const double t_eq = (1.0 - x.sum()) / static_cast<double>(m_);
    x.array() += t_eq;

    std::vector<std::size_t> active;  // inequality ids
    std::vector<double> u{t_eq};       // equality multiplier first
    Matrix normals(m, static_cast<Eigen::Index>(m_) + 1);
    normals.col(0).setOnes();

    const std::size_t max_outer = 8 * (ids_.size() + m_) + 32;
    for (std::size_t outer = 0; outer < max_outer; ++outer) {
      // Most violated inequality.
      std::size_t p = 0;
      double worst = -kFeasTol;
      bool found = false;
      for (std::size_t id : ids_) {
        if (std::find(active.begin(), active.end(), id) != active.end()) continue;
        const double s = slack(id, x);
        if (s < worst) {
          worst = s;
          p = id;
          found = true;
        }
      }
      if (!found) {
        res.point = std::move(x);
        res.multipliers = Eigen::Map<Vector>(u.data(), static_cast<Eigen::Index>(u.size()));
        res.active = std::move(active);
        return res;
      }

      const Vector np = normal(p);
      u.push_back(0.0);
      for (std::size_t inner = 0;; ++inner) {
        if (inner > 4 * m_ + 16) throw InternalError("projection inner loop did not terminate");
        const auto q = static_cast<Eigen::Index>(active.size()) + 1;
        for (Eigen::Index a = 1; a < q; ++a) normals.col(a) = normal(active[static_cast<std::size_t>(a - 1)]);
        const auto nmat = normals.leftCols(q);
        const Matrix gram = nmat.transpose() * nmat;
        const Vector r = gram.ldlt().solve(nmat.transpose() * np);
        const Vector z = np - nmat * r;

        double t1 = std::numeric_limits<double>::infinity();
        std::size_t drop = 0;
        for (Eigen::Index a = 1; a < q; ++a) {
          if (r[a] > kDirTol) {
            const double ratio = u[static_cast<std::size_t>(a)] / r[a];
            if (ratio < t1) {
              t1 = ratio;
              drop = static_cast<std::size_t>(a);
            }
          }
        }
        const double zz = z.squaredNorm();
        const double t2 = zz > kDirTol * kDirTol ? -slack(p, x) / zz
                                                  : std::numeric_limits<double>::infinity();
        if (std::isinf(t1) && std::isinf(t2)) {
          res.feasible = false;
          res.point = std::move(x);
          return res;
        }
        const double t = std::min(t1, t2);
        if (!std::isinf(t2)) x += t * z;
        for (Eigen::Index a = 0; a < q; ++a) u[static_cast<std::size_t>(a)] -= t * r[a];
        u.back() += t;
        if (t2 <= t1) {
          active.push_back(p);
          break;
        }
        // Partial step: release the blocking constraint and retry.
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop - 1));
        u.erase(u.begin() + static_cast<std::ptrdiff_t>(drop));
      }
    }
    throw InternalError("projection did not converge");
  }

 private:
  static constexpr double kFeasTol = 1e-12;
  static constexpr double kDirTol = 1e-12;

  double slack(std::size_t id, const Vector& x) const {
    if (id < m_) return x[static_cast<Eigen::Index>(id)];
    const auto& c = poly_.constraints()[id - m_];
    return c.rhs - AdmissiblePolytope::subset_sum(x, c.subset);
  }

  Vector normal(std::size_t id) const {
    Vector n = Vector::Zero(static_cast<Eigen::Index>(m_));
    if (id < m_) {
      n[static_cast<Eigen::Index>(id)] = 1.0;
      return n;
    }
    StationMask s = poly_.constraints()[id - m_].subset;
    while (s) {
      n[std::countr_zero(s)] = -1.0;
      s &= s - 1;
    }
    return n;
  }

  const AdmissiblePolytope& poly_;
  std::size_t m_;
  std::vector<std::size_t> ids_;
};

}  // namespace detail

/// Full projection result including multipliers; `feasible` is false when
/// the polytope is empty.
inline ProjectionResult project_with_multipliers(const Vector& y, const AdmissiblePolytope& poly) {
  require_size(y, static_cast<Eigen::Index>(poly.num_stations()), "projected point");
  return detail::ActiveSetProjector(poly).run(y);
}

/// argmin ||z - y|| over the polytope.
inline Vector project(const Vector& y, const AdmissiblePolytope& poly) {
  if (poly.empty()) throw EmptyPolytope("cannot project onto an empty set");
  if (poly.contains(y, 0.0)) return y;
  auto res = project_with_multipliers(y, poly);
  if (!res.feasible) throw EmptyPolytope("constraints are inconsistent");
  return std::move(res.point);
}

/// Admissible allocations of one company: the simplex intersected with
/// N_i sum_{j in S} x_j <= max{0, |union_{j in S} F_j| - |S|} for every
/// proper nonempty subset S. The result is flagged empty when infeasible.
inline AdmissiblePolytope admissible_polytope(const FleetReachability& fleet) {
  const std::size_t m = fleet.num_stations();
  const auto n = static_cast<double>(fleet.num_vehicles());
  if (fleet.num_vehicles() == 0) throw DegenerateInput("company has no vehicles");
  const auto unions = fleet.union_sizes();
  const StationMask full = full_mask(m);
  std::vector<SubsetConstraint> cons;
  cons.reserve(unions.size());
  for (StationMask s = 1; s < full; ++s) {
    const double cap = std::max(0.0, static_cast<double>(unions[s]) - std::popcount(s));
    cons.push_back({s, cap / n});
  }
  AdmissiblePolytope poly(m, std::move(cons));
  const Vector centre = Vector::Constant(static_cast<Eigen::Index>(m), 1.0 / static_cast<double>(m));
  if (!poly.contains(centre) && !project_with_multipliers(centre, poly).feasible) poly.mark_empty();
  return poly;
}

/// The plain probability simplex (no reachability restrictions).
inline AdmissiblePolytope simplex_polytope(std::size_t m) { return AdmissiblePolytope(m, {}); }

// ---------------------------------------------------------------------------
// Rounding.

/// Largest-remainder rounding of N_i x into an integer allocation, repaired
/// within the floor/ceil lattice until Hall's condition holds.
inline DiscreteAllocation discretize(const Vector& x, const FleetReachability& fleet) {
  const std::size_t m = fleet.num_stations();
  require_size(x, static_cast<Eigen::Index>(m), "x^i");
  const auto n_total = static_cast<long>(fleet.num_vehicles());
  constexpr double kIntegral = 1e-9;

  DiscreteAllocation base(m);
  std::vector<std::pair<double, std::size_t>> fractional;
  long assigned = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const double target = std::max(0.0, static_cast<double>(n_total) * x[static_cast<Eigen::Index>(j)]);
    const double nearest = std::round(target);
    if (std::abs(target - nearest) < kIntegral * std::max(1.0, target)) {
      base[j] = static_cast<long>(nearest);
    } else {
      base[j] = static_cast<long>(std::floor(target));
      fractional.emplace_back(target - std::floor(target), j);
    }
    assigned += base[j];
  }
  const long remaining = n_total - assigned;
  if (remaining < 0 || remaining > static_cast<long>(fractional.size()))
    throw InternalError("allocation does not sum to the fleet size");
  std::stable_sort(fractional.begin(), fractional.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  // Choose `remaining` stations to round up, in order of preference.
  const auto r = static_cast<std::size_t>(remaining);
  std::vector<std::size_t> pick(r);
  std::iota(pick.begin(), pick.end(), 0);
  constexpr std::size_t kMaxCandidates = 2'000'000;
  for (std::size_t tried = 0; tried < kMaxCandidates; ++tried) {
    DiscreteAllocation n = base;
    for (std::size_t k : pick) ++n[fractional[k].second];
    if (hall_condition(n, fleet)) return n;
    // Next combination in lexicographic order.
    std::size_t pos = r;
    while (pos > 0 && pick[pos - 1] == fractional.size() - r + pos - 1) --pos;
    if (pos == 0) break;
    ++pick[pos - 1];
    for (std::size_t k = pos; k < r; ++k) pick[k] = pick[k - 1] + 1;
  }
  throw InternalError("no admissible rounding found for an admissible allocation");
}

}  // namespace fleetcharge
