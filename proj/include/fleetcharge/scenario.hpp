#pragma once

// JSON scenario configuration. Relative file paths resolve against the
// directory of the configuration file.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "linalg.hpp"
#include "simulation.hpp"

namespace fleetcharge {

struct StationSpec {
  long node = 0;
  double capacity = 0;
  double queue_weight = 0;
};

struct CompanySpec {
  std::size_t fleet = 0;
  double idle_cost = 1;
};

struct GridSpec {
  std::size_t rows = 16, cols = 16;
  double spacing_m = 600, jitter = 0.2;
  std::uint64_t seed = 7;
};

struct NamedPrice {
  std::string name;
  Vector price;
};

struct Seeds {
  std::uint64_t master = 1;
  std::uint64_t simulation = 0, demand = 0, profit = 0, sweep = 0, surge = 0;

  /// Copy with every unset (zero) stream seed derived from the master seed.
  Seeds resolved() const {
    Seeds r = *this;
    r.resolve();
    return r;
  }

  void resolve() {
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32)};
    std::uint32_t s[10];
    seq.generate(s, s + 10);
    auto pick = [&](std::uint64_t& v, int k) {
      if (v == 0) v = (static_cast<std::uint64_t>(s[2 * k]) << 32) | s[2 * k + 1];
    };
    pick(simulation, 0);
    pick(demand, 1);
    pick(profit, 2);
    pick(sweep, 3);
    pick(surge, 4);
  }
};

struct ScenarioConfig {
  std::filesystem::path base_dir;
  Seeds seeds;

  std::optional<std::filesystem::path> network_file;
  GridSpec grid;
  std::vector<StationSpec> stations;
  std::vector<CompanySpec> companies;

  std::optional<std::filesystem::path> demand_file;
  double demand_rate = 2800;
  std::vector<double> region_weights;

  SimulationParams simulation;
  RegionParams region;  // idle_cost filled from companies; desired filled after simulation
  std::optional<Vector> desired_override;
  double ag_scale = 2.5;

  std::size_t max_iterations = 1000;
  double tolerance = 1e-8;
  double step_fraction = 0.9;

  std::string mechanism = "rsg";  // rsg | fixed-price | grid-search
  Vector fixed_price;
  std::vector<NamedPrice> baselines;
  double grid_p_max = 5.0;
  std::size_t grid_resolution = 9;
  std::size_t grid_refine = 1;
  bool grid_compare = true;  // include the grid-search row in the mechanism comparison

  bool robustness = false;
  std::vector<double> alphas{0.0, 0.05, 0.1, 0.15, 0.25, 0.35};
  std::size_t samples = 100;

  Vector rho_min;
  double surge_margin = 1e-6;
  std::size_t surge_budget = 20000;
  std::optional<double> surge_cap;

  std::size_t num_stations() const { return stations.size(); }

  void validate() const {
    const auto m = static_cast<Eigen::Index>(stations.size());
    if (m < 1 || stations.size() > kMaxStations) throw InvalidParameter("between 1 and 20 stations required");
    for (const auto& s : stations)
      if (!(s.capacity > 0) || !(s.queue_weight > 0)) throw InvalidParameter("station capacity and queue weight must be positive");
    if (companies.empty()) throw InvalidParameter("at least one company required");
    for (const auto& c : companies)
      if (c.fleet == 0) throw InvalidParameter("fleet sizes must be positive");
    simulation.validate();
    require_size(region.occupancy, m, "occupancy");
    if ((region.occupancy.array() < 0).any() || (region.occupancy.array() > 1).any())
      throw InvalidParameter("occupancy probabilities must lie in [0, 1]");
    if (!demand_file && region_weights.size() != stations.size()) throw DimensionMismatch("one region weight per station");
    if (desired_override && !on_simplex(*desired_override)) throw InvalidParameter("desired distribution must be on the simplex");
    if (!(ag_scale > 0)) throw InvalidParameter("government weight scale must be positive");
    if (!(step_fraction > 0 && step_fraction < 1)) throw InvalidParameter("step fraction must lie in (0, 1)");
    if (!(tolerance >= 0)) throw InvalidParameter("tolerance must be nonnegative");
    if (mechanism != "rsg" && mechanism != "fixed-price" && mechanism != "grid-search")
      throw InvalidParameter("mechanism must be rsg, fixed-price or grid-search");
    if (mechanism == "fixed-price") require_size(fixed_price, m, "fixed price");
    if (fixed_price.size() > 0 && (fixed_price.array() < 0).any()) throw InvalidParameter("fixed prices must be nonnegative");
    for (const auto& b : baselines) {
      require_size(b.price, m, "baseline price");
      if ((b.price.array() < 0).any()) throw InvalidParameter("baseline prices must be nonnegative");
    }
    if ((mechanism == "grid-search" || grid_compare) && grid_resolution < 2) throw InvalidParameter("grid resolution must be at least 2");
    if (!(grid_p_max > 0)) throw InvalidParameter("grid p_max must be positive");
    for (double a : alphas)
      if (!(a >= 0)) throw InvalidParameter("alpha must be nonnegative");
    if (samples < 1) throw InvalidParameter("at least one robustness sample");
    require_size(rho_min, m, "rho_min");
    if ((rho_min.array() < 0).any()) throw InvalidParameter("rho_min must be nonnegative");
  }
};

namespace detail {

inline Vector json_vector(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw ParseError(std::string(what) + " must contain numbers");
    v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
  }
  return v;
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void read_range(const nlohmann::json& j, const char* key, double& lo, double& hi) {
  if (!j.contains(key)) return;
  const auto& r = j.at(key);
  if (!r.is_array() || r.size() != 2) throw ParseError(std::string(key) + " must be [lo, hi]");
  lo = r[0].get<double>();
  hi = r[1].get<double>();
}

}  // namespace detail

inline ScenarioConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = ".") {
  ScenarioConfig c;
  c.base_dir = base_dir;
  try {
    if (!j.is_object()) throw ParseError("configuration must be a JSON object");
    if (j.contains("seeds")) {
      const auto& s = j.at("seeds");
      detail::read(s, "master", c.seeds.master);
      detail::read(s, "simulation", c.seeds.simulation);
      detail::read(s, "demand", c.seeds.demand);
      detail::read(s, "profit", c.seeds.profit);
      detail::read(s, "sweep", c.seeds.sweep);
      detail::read(s, "surge", c.seeds.surge);
    }

    const auto& net = j.at("network");
    if (net.contains("file")) {
      c.network_file = base_dir / net.at("file").get<std::string>();
    } else if (net.contains("grid")) {
      const auto& g = net.at("grid");
      detail::read(g, "rows", c.grid.rows);
      detail::read(g, "cols", c.grid.cols);
      detail::read(g, "spacing_m", c.grid.spacing_m);
      detail::read(g, "jitter", c.grid.jitter);
      detail::read(g, "seed", c.grid.seed);
    } else {
      throw ParseError("network needs either \"file\" or \"grid\"");
    }

    for (const auto& s : j.at("stations"))
      c.stations.push_back({s.at("node").get<long>(), s.at("capacity").get<double>(), s.at("queue_weight").get<double>()});
    for (const auto& co : j.at("companies")) {
      CompanySpec spec;
      spec.fleet = co.at("fleet").get<std::size_t>();
      detail::read(co, "idle_cost", spec.idle_cost);
      c.companies.push_back(spec);
    }

    const auto& dem = j.at("demand");
    if (dem.contains("file")) {
      c.demand_file = base_dir / dem.at("file").get<std::string>();
    } else {
      detail::read(dem, "rate_per_hour", c.demand_rate);
      c.region_weights = dem.at("region_weights").get<std::vector<double>>();
    }

    if (j.contains("simulation")) {
      const auto& s = j.at("simulation");
      auto& p = c.simulation;
      detail::read(s, "duration_h", p.duration_h);
      detail::read(s, "step_s", p.step_s);
      detail::read(s, "pickup_limit_min", p.pickup_limit_min);
      detail::read(s, "background_accumulation", p.background_accumulation);
      detail::read_range(s, "initial_battery", p.initial_battery_lo, p.initial_battery_hi);
      detail::read_range(s, "threshold", p.threshold_lo, p.threshold_hi);
      detail::read_range(s, "range_km", p.range_lo_km, p.range_hi_km);
      detail::read(s, "beta", p.beta);
      detail::read(s, "desired_battery", p.desired_battery);
    }

    const auto& e = j.at("economics");
    c.region.occupancy = detail::json_vector(e.at("occupancy"), "occupancy");
    detail::read(e, "phi", c.region.phi);
    detail::read(e, "profit_noise", c.region.profit_noise);
    detail::read(e, "horizon_h", c.region.horizon_h);
    detail::read(e, "daily_h", c.region.daily_h);
    detail::read(e, "speed_estimate", c.region.speed_estimate);
    detail::read(e, "ag_scale", c.ag_scale);
    if (e.contains("desired")) c.desired_override = detail::json_vector(e.at("desired"), "desired");
    for (const auto& co : c.companies) c.region.idle_cost.push_back(co.idle_cost);

    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      detail::read(s, "max_iterations", c.max_iterations);
      detail::read(s, "tolerance", c.tolerance);
      detail::read(s, "step_fraction", c.step_fraction);
    }
    detail::read(j, "mechanism", c.mechanism);
    if (j.contains("fixed_price")) c.fixed_price = detail::json_vector(j.at("fixed_price"), "fixed_price");
    if (j.contains("baselines"))
      for (const auto& b : j.at("baselines"))
        c.baselines.push_back({b.at("name").get<std::string>(), detail::json_vector(b.at("price"), "baseline price")});
    if (j.contains("grid_search")) {
      const auto& g = j.at("grid_search");
      detail::read(g, "p_max", c.grid_p_max);
      detail::read(g, "resolution", c.grid_resolution);
      detail::read(g, "refine", c.grid_refine);
      detail::read(g, "compare", c.grid_compare);
    }
    if (j.contains("robustness")) {
      const auto& r = j.at("robustness");
      detail::read(r, "enabled", c.robustness);
      detail::read(r, "alphas", c.alphas);
      detail::read(r, "samples", c.samples);
    }
    c.rho_min = Vector::Zero(static_cast<Eigen::Index>(c.stations.size()));
    if (j.contains("surge")) {
      const auto& s = j.at("surge");
      if (s.contains("rho_min")) c.rho_min = detail::json_vector(s.at("rho_min"), "rho_min");
      detail::read(s, "margin", c.surge_margin);
      detail::read(s, "budget", c.surge_budget);
      if (s.contains("cap") && !s.at("cap").is_null()) c.surge_cap = s.at("cap").get<double>();
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("configuration: ") + ex.what());
  }
  c.validate();
  return c;
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open configuration " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(path.string() + ": " + ex.what());
  }
  return parse_config(j, path.parent_path());
}

}  // namespace fleetcharge
