#pragma once

// Experiment plumbing: scenario preparation, upper-level mechanisms
// (system optimal policies, fixed prices, grid search), the surge-pricing
// lower level, and plot-ready CSV output.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "equilibrium.hpp"
#include "errors.hpp"
#include "feasible_sets.hpp"
#include "model.hpp"
#include "network.hpp"
#include "robustness.hpp"
#include "scenario.hpp"
#include "simulation.hpp"
#include "surge.hpp"

namespace fleetcharge {

template <class F>
auto with_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    rethrow_with_stage(stage, e);
  }
}

// ---------------------------------------------------------------------------
// Scenario preparation.

struct Scenario {
  ScenarioConfig config;
  Seeds seeds;  // resolved
  RoadNetwork network;
  std::optional<DistanceTable> table;
  std::vector<std::size_t> station_nodes;  // node indices
  std::vector<int> regions;
  std::vector<DemandRequest> demand;
  FleetSnapshot snapshot;

  // Filled by build_game.
  std::vector<CompanyFeasibility> feasibility;
  RegionParams region;
  std::vector<CompanyEstimate> estimates;
  std::vector<std::vector<DriverParams>> drivers;
  GameInstance game;
  std::vector<FleetReachability> reach;
  std::vector<AdmissiblePolytope> sets;

  std::size_t num_stations() const { return station_nodes.size(); }
};

/// Network, regions, demand and the simulated operating period.
inline Scenario simulate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  Scenario sc;
  sc.config = cfg;
  sc.seeds = cfg.seeds.resolved();
  sc.network = with_stage("network", [&] {
    if (cfg.network_file) {
      std::ifstream in(*cfg.network_file);
      if (!in) throw ParseError("cannot open network file " + cfg.network_file->string());
      return RoadNetwork::parse(in);
    }
    return grid_network(cfg.grid.rows, cfg.grid.cols, cfg.grid.spacing_m, cfg.grid.jitter, cfg.grid.seed);
  });
  with_stage("network", [&] {
    for (const auto& s : cfg.stations) sc.station_nodes.push_back(sc.network.index_of(s.node));
    if (!stations_strongly_connected(sc.network, sc.station_nodes))
      throw DegenerateInput("stations are not mutually reachable");
    sc.table.emplace(sc.network);
    sc.regions = station_regions(sc.network, sc.station_nodes);
  });
  sc.demand = with_stage("demand", [&] {
    if (cfg.demand_file) {
      std::ifstream in(*cfg.demand_file);
      if (!in) throw ParseError("cannot open demand file " + cfg.demand_file->string());
      return parse_demand(in, sc.network);
    }
    return generate_demand(sc.network, sc.regions, cfg.demand_rate, cfg.region_weights, cfg.simulation.duration_h,
                           sc.seeds.demand);
  });
  sc.snapshot = with_stage("simulate", [&] {
    std::vector<std::size_t> fleets;
    for (const auto& c : cfg.companies) fleets.push_back(c.fleet);
    return simulate_period(*sc.table, sc.regions, sc.station_nodes.size(), fleets, cfg.simulation, sc.demand,
                           sc.seeds.simulation);
  });
  return sc;
}

/// Feasibility, parameter estimates, the game instance and its polytopes.
inline void build_game(Scenario& sc) {
  const auto& cfg = sc.config;
  const auto m = static_cast<Eigen::Index>(sc.num_stations());
  sc.feasibility = with_stage("feasibility", [&] {
    return compute_feasibility(sc.snapshot, *sc.table, sc.station_nodes, cfg.companies.size());
  });
  with_stage("estimates", [&] {
    sc.region = cfg.region;
    sc.region.desired = cfg.desired_override ? *cfg.desired_override : request_distribution(sc.snapshot);
    const Vector e_pro = expected_profit(sc.region, sc.seeds.profit);
    sc.estimates = estimate_company_params(sc.snapshot, sc.feasibility, sc.region, e_pro);
    sc.drivers = estimate_driver_params(sc.snapshot, sc.feasibility, sc.region, sc.estimates);
  });
  sc.game = with_stage("game", [&] {
    StationSet st;
    st.capacity.resize(m);
    st.queue_cost.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      st.capacity[j] = cfg.stations[static_cast<std::size_t>(j)].capacity;
      st.queue_cost[j] = cfg.stations[static_cast<std::size_t>(j)].queue_weight;
    }
    std::vector<CompanyParams> cs;
    for (const auto& e : sc.estimates) cs.push_back(CompanyParams::make(e.fleet, e.D, e.f, st));
    GameInstance g{st, std::move(cs), {}};
    g.objective = GovernmentObjective::from_set_point(cfg.ag_scale * st.queue_cost,
                                                      setpoint_from_distribution(g.fleets(), sc.region.desired));
    g.validate();
    return g;
  });
  with_stage("polytopes", [&] {
    sc.reach.clear();
    sc.sets.clear();
    for (std::size_t i = 0; i < sc.feasibility.size(); ++i) {
      sc.reach.push_back(sc.feasibility[i].reach());
      sc.sets.push_back(admissible_polytope(sc.reach.back()));
      if (sc.sets.back().empty())
        throw EmptyPolytope("company " + std::to_string(i) + " has no admissible allocation");
    }
  });
}

inline Scenario prepare(const ScenarioConfig& cfg) {
  Scenario sc = simulate_scenario(cfg);
  build_game(sc);
  return sc;
}

inline SolveOptions solve_options(const ScenarioConfig& cfg) {
  SolveOptions o;
  o.max_iterations = cfg.max_iterations;
  o.tolerance = cfg.tolerance;
  o.step_fraction = cfg.step_fraction;
  return o;
}

// ---------------------------------------------------------------------------
// Upper level.

/// Nash equilibrium under one constant price vector shared by all companies.
inline SolveReport fixed_price_nash(const GameInstance& g, const std::vector<AdmissiblePolytope>& sets,
                                    const Vector& price, const SolveOptions& opt = {}) {
  require_size(price, static_cast<Eigen::Index>(g.num_stations()), "fixed price");
  if ((price.array() < 0).any()) throw InvalidParameter("fixed prices must be nonnegative");
  return solve_nash(fixed_price_game(g, price), sets, g.objective, default_start(sets), opt);
}

struct GridPoint {
  Vector price;
  double j_g = 0;
  bool converged = false;
};

struct GridSearchResult {
  Vector best_price;
  SolveReport report;  // at best_price
  std::vector<GridPoint> evaluated;
};

/// Grid over [0, p_max]^m with `resolution` points per axis, then `refine`
/// passes over the cell centred at the incumbent. Traversal is
/// lexicographic with the last station fastest; ties keep the first point.
inline GridSearchResult grid_search(const GameInstance& g, const std::vector<AdmissiblePolytope>& sets, double p_max,
                                    std::size_t resolution, std::size_t refine = 1, const SolveOptions& opt = {}) {
  if (!(p_max > 0)) throw InvalidParameter("p_max must be positive");
  if (resolution < 2) throw InvalidParameter("grid resolution must be at least 2");
  const std::size_t m = g.num_stations();
  const Vector x0 = default_start(sets);
  SolveOptions quiet = opt;
  quiet.record_trace = false;

  GridSearchResult res;
  double best = std::numeric_limits<double>::infinity();
  auto sweep = [&](const Vector& lo, const Vector& hi) {
    std::vector<std::size_t> idx(m, 0);
    while (true) {
      Vector p(static_cast<Eigen::Index>(m));
      for (std::size_t j = 0; j < m; ++j) {
        const auto k = static_cast<Eigen::Index>(j);
        p[k] = lo[k] + (hi[k] - lo[k]) * static_cast<double>(idx[j]) / static_cast<double>(resolution - 1);
      }
      const auto rep = solve_nash(fixed_price_game(g, p), sets, g.objective, x0, quiet);
      const double j_g = rep.government_cost.back();
      res.evaluated.push_back({p, j_g, rep.converged});
      if (j_g < best) {
        best = j_g;
        res.best_price = p;
      }
      std::size_t pos = m;
      while (pos > 0 && ++idx[pos - 1] == resolution) idx[--pos] = 0;
      if (pos == 0) break;
    }
  };
  const Vector zero = Vector::Zero(static_cast<Eigen::Index>(m));
  sweep(zero, Vector::Constant(static_cast<Eigen::Index>(m), p_max));
  double cell = p_max / static_cast<double>(resolution - 1);
  for (std::size_t r = 0; r < refine; ++r) {
    const Vector centre = res.best_price;
    const Vector lo = (centre.array() - cell / 2).max(0.0).matrix();
    const Vector hi = (centre.array() + cell / 2).min(p_max).matrix();
    sweep(lo, hi);
    cell /= static_cast<double>(resolution - 1);
  }
  res.report = solve_nash(fixed_price_game(g, res.best_price), sets, g.objective, x0, opt);
  return res;
}

struct UpperResult {
  std::string mechanism;
  SolveReport report;
  std::vector<Vector> prices;  // per company at the equilibrium
  std::optional<Vector> fixed_price;
  std::size_t grid_evaluations = 0;
  double seconds = 0;  // wall clock of the solve

  double j_g() const { return report.government_cost.back(); }
  Vector sigma() const { return report.sigma.back(); }
};

/// Prices each company pays at x under system optimal policies.
inline std::vector<Vector> equilibrium_prices(const GameInstance& g, const Vector& x) {
  const std::size_t m = g.num_stations();
  const Vector fleets = g.fleets();
  std::vector<Vector> out;
  for (std::size_t i = 0; i < g.num_companies(); ++i)
    out.push_back(system_optimal_policy(g, i, block(x, i, m), aggregate_except(x, fleets, m, i)));
  return out;
}

/// `grid`, when given, receives every evaluated grid point.
inline UpperResult solve_upper(const Scenario& sc, const std::string& mechanism, GridSearchResult* grid = nullptr) {
  const auto& cfg = sc.config;
  const auto opt = solve_options(cfg);
  UpperResult out;
  out.mechanism = mechanism;
  const auto t0 = std::chrono::steady_clock::now();
  with_stage("upper level", [&] {
    if (mechanism == "rsg") {
      out.report = solve_nash(pricing_game(sc.game), sc.sets, sc.game.objective, default_start(sc.sets), opt);
      out.prices = equilibrium_prices(sc.game, out.report.solution);
    } else if (mechanism == "fixed-price") {
      out.fixed_price = cfg.fixed_price;
      out.report = fixed_price_nash(sc.game, sc.sets, cfg.fixed_price, opt);
    } else if (mechanism == "grid-search") {
      auto gs = grid_search(sc.game, sc.sets, cfg.grid_p_max, cfg.grid_resolution, cfg.grid_refine, opt);
      out.fixed_price = gs.best_price;
      out.grid_evaluations = gs.evaluated.size();
      out.report = gs.report;
      if (grid) *grid = std::move(gs);
    } else {
      throw InvalidParameter("unknown mechanism " + mechanism);
    }
    if (out.fixed_price) out.prices.assign(sc.game.num_companies(), *out.fixed_price);
  });
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

struct MechanismRow {
  std::string name;
  std::optional<Vector> price;
  double j_g = 0;
  Vector sigma;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Configured baselines, then the grid-search incumbent (if enabled), then
/// system optimal pricing.
inline std::vector<MechanismRow> compare_mechanisms(const Scenario& sc, const UpperResult* rsg = nullptr) {
  const auto opt = solve_options(sc.config);
  std::vector<MechanismRow> rows;
  auto add = [&](std::string name, std::optional<Vector> price, const SolveReport& r) {
    rows.push_back({std::move(name), std::move(price), r.government_cost.back(), r.sigma.back(), r.iterations,
                    r.converged});
  };
  with_stage("baselines", [&] {
    for (const auto& b : sc.config.baselines) add(b.name, b.price, fixed_price_nash(sc.game, sc.sets, b.price, opt));
  });
  if (sc.config.grid_compare) {
    const auto gs = solve_upper(sc, "grid-search");
    add("grid-search", gs.fixed_price, gs.report);
  }
  if (rsg) {
    add("rsg", std::nullopt, rsg->report);
  } else {
    add("rsg", std::nullopt, solve_upper(sc, "rsg").report);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Lower level.

struct LowerCompany {
  DiscreteAllocation target;  // n^i
  Vector price;               // p_i at the equilibrium
  SurgeSolution surge;
};

inline std::vector<LowerCompany> solve_lower(const Scenario& sc, const UpperResult& upper) {
  const std::size_t m = sc.num_stations();
  SurgeOptions so;
  so.margin = sc.config.surge_margin;
  so.cap = sc.config.surge_cap;
  so.budget = sc.config.surge_budget;
  so.seed = sc.seeds.surge;
  std::vector<LowerCompany> out;
  with_stage("lower level", [&] {
    for (std::size_t i = 0; i < sc.game.num_companies(); ++i) {
      LowerCompany lc;
      lc.target = discretize(Vector(block(upper.report.solution, i, m)), sc.reach[i]);
      lc.price = upper.prices.at(i);
      lc.surge = two_step(sc.drivers[i], lc.price, sc.config.rho_min, lc.target, so);
      out.push_back(std::move(lc));
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Robustness.

inline SweepResult run_robustness(const Scenario& sc) {
  SweepOptions o;
  o.alphas = sc.config.alphas;
  o.samples = sc.config.samples;
  o.seed = sc.seeds.sweep;
  o.solve = solve_options(sc.config);
  for (const auto& b : sc.config.baselines) o.baselines.emplace_back(b.name, b.price);
  return with_stage("robustness", [&] { return robustness_sweep(sc.game, sc.sets, o); });
}

// ---------------------------------------------------------------------------
// CSV output. Numbers use %.10g so reruns compare byte for byte.

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string join(const Vector& v) {
  std::string s;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (k) s += ',';
    s += num(v[k]);
  }
  return s;
}

inline std::string indexed(const std::string& prefix, std::size_t m) {
  std::string s;
  for (std::size_t j = 0; j < m; ++j) s += (j ? "," : "") + prefix + std::to_string(j + 1);
  return s;
}

inline void write_snapshot(std::ostream& out, const Scenario& sc) {
  out << "vehicle_id,company,node,battery,threshold,range_km,traveled_km,needs_charge\n";
  for (std::size_t v = 0; v < sc.snapshot.vehicles.size(); ++v) {
    const auto& s = sc.snapshot.vehicles[v];
    out << v << ',' << s.company + 1 << ',' << sc.network.node(s.node).id << ',' << num(s.battery) << ','
        << num(s.threshold) << ',' << num(s.range_km) << ',' << num(s.traveled_km) << ',' << (s.needs_charge() ? 1 : 0)
        << '\n';
  }
}

inline void write_simulation_summary(std::ostream& out, const Scenario& sc) {
  out << "company,fleet,needing\n";
  for (std::size_t c = 0; c < sc.config.companies.size(); ++c)
    out << c + 1 << ',' << sc.config.companies[c].fleet << ',' << sc.snapshot.needing[c] << '\n';
  out << "served," << sc.snapshot.served << ",\nunserved," << sc.snapshot.unserved << ",\n";
}

inline void write_speed_trace(std::ostream& out, const Scenario& sc) {
  out << "step,time_s,speed_kmh\n";
  for (std::size_t k = 0; k < sc.snapshot.speed_trace.size(); ++k)
    out << k << ',' << num(static_cast<double>(k) * sc.config.simulation.step_s) << ','
        << num(sc.snapshot.speed_trace[k]) << '\n';
}

/// One row per (company, station) with every estimated quantity.
inline void write_parameters(std::ostream& out, const Scenario& sc) {
  out << "company,station,N,R,D,e_arr,e_pro,f,Z,N_hat\n";
  const auto& sp = *sc.game.objective.set_point;
  for (std::size_t i = 0; i < sc.estimates.size(); ++i) {
    const auto& e = sc.estimates[i];
    for (Eigen::Index k = 0; k < e.R.size(); ++k)
      out << i + 1 << ',' << k + 1 << ',' << num(e.fleet) << ',' << num(e.R[k]) << ',' << num(e.D[k]) << ','
          << num(e.e_arr[k]) << ',' << num(e.e_pro[k]) << ',' << num(e.f[k]) << ',' << num(sc.region.desired[k]) << ','
          << num(sp[k]) << '\n';
  }
}

inline void write_trace(std::ostream& out, const SolveReport& r) {
  const std::size_t m = r.sigma.empty() ? 0 : static_cast<std::size_t>(r.sigma[0].size());
  out << "iteration,j_g," << indexed("sigma_", m) << ",residual\n";
  for (std::size_t k = 0; k < r.iterates.size(); ++k)
    out << k << ',' << num(r.government_cost[k]) << ',' << join(r.sigma[k]) << ',' << num(r.residuals[k]) << '\n';
}

/// Company rows with (x_j, p_j) column pairs per station, then the set
/// point and the attained aggregate.
inline void write_prices(std::ostream& out, const Scenario& sc, const UpperResult& u) {
  const std::size_t m = sc.num_stations();
  out << "row";
  for (std::size_t j = 1; j <= m; ++j) out << ",x_" << j << ",p_" << j;
  out << '\n';
  for (std::size_t i = 0; i < sc.game.num_companies(); ++i) {
    out << "C" << i + 1;
    for (std::size_t j = 0; j < m; ++j)
      out << ',' << num(u.report.solution[static_cast<Eigen::Index>(i * m + j)]) << ','
          << num(u.prices[i][static_cast<Eigen::Index>(j)]);
    out << '\n';
  }
  auto total = [&](const char* name, const Vector& v) {
    out << name;
    for (Eigen::Index j = 0; j < v.size(); ++j) out << ',' << num(v[j]) << ',';
    out << '\n';
  };
  total("N_hat", *sc.game.objective.set_point);
  total("sigma", u.sigma());
}

/// Mechanism rows with J_G and the attained aggregate; the first row holds
/// the set point.
inline void write_mechanisms(std::ostream& out, const Scenario& sc, const std::vector<MechanismRow>& rows) {
  const std::size_t m = sc.num_stations();
  out << "mechanism,j_g," << indexed("sigma_", m) << ',' << indexed("price_", m) << ",iterations,converged\n";
  out << "N_hat,," << join(*sc.game.objective.set_point) << std::string(m, ',') << ",,\n";
  for (const auto& r : rows) {
    out << r.name << ',' << num(r.j_g) << ',' << join(r.sigma) << ',';
    if (r.price) out << join(*r.price);
    else out << std::string(m - 1, ',');
    out << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << '\n';
  }
}

/// Nonzero surge prices, one row per (vehicle, station).
inline void write_surge(std::ostream& out, const Scenario& sc, const std::vector<LowerCompany>& lower) {
  out << "company,vehicle_id,station,rho\n";
  for (std::size_t i = 0; i < lower.size(); ++i) {
    const auto& ids = sc.feasibility[i].vehicles;
    const auto& rho = lower[i].surge.rho;
    for (std::size_t a = 0; a < rho.size(); ++a)
      for (Eigen::Index k = 0; k < rho[a].size(); ++k)
        if (rho[a][k] != 0) out << i + 1 << ',' << ids[a] << ',' << k + 1 << ',' << num(rho[a][k]) << '\n';
  }
}

inline void write_surge_summary(std::ostream& out, const Scenario& sc, const std::vector<LowerCompany>& lower) {
  const std::size_t m = sc.num_stations();
  out << "company,mode,solver,j_m,evaluations," << indexed("target_", m) << ',' << indexed("realised_", m) << '\n';
  for (std::size_t i = 0; i < lower.size(); ++i) {
    const auto& s = lower[i].surge;
    out << i + 1 << ',' << to_string(s.mode) << ',' << s.solver << ',' << num(s.cost) << ',' << s.evaluations;
    for (long n : lower[i].target) out << ',' << n;
    for (long n : s.counts) out << ',' << n;
    out << '\n';
  }
}

inline void write_grid_points(std::ostream& out, const GridSearchResult& r) {
  const std::size_t m = static_cast<std::size_t>(r.best_price.size());
  out << "evaluation," << indexed("price_", m) << ",j_g,converged\n";
  for (std::size_t k = 0; k < r.evaluated.size(); ++k)
    out << k << ',' << join(r.evaluated[k].price) << ',' << num(r.evaluated[k].j_g) << ','
        << (r.evaluated[k].converged ? 1 : 0) << '\n';
}

inline void write_robustness(std::ostream& out, const SweepResult& r) {
  out << "alpha,sample_id,mechanism,j_g,assumption_ok\n";
  for (const auto& row : r.rows)
    out << num(row.alpha) << ',' << row.sample << ',' << row.mechanism << ',' << num(row.j_g) << ','
        << (row.assumption_ok ? 1 : 0) << '\n';
}

inline void write_robustness_summary(std::ostream& out, const SweepResult& r) {
  std::map<std::pair<double, std::string>, std::vector<double>> groups;
  for (const auto& row : r.rows) groups[{row.alpha, row.mechanism}].push_back(row.j_g);
  out << "alpha,mechanism,samples,mean_j_g,std_j_g\n";
  for (const auto& [key, v] : groups) {
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
    out << num(key.first) << ',' << key.second << ',' << v.size() << ',' << num(mean) << ',' << num(sd) << '\n';
  }
}

inline void write_robustness_checks(std::ostream& out, const SweepResult& r) {
  out << "alpha,sample_id,assumption_ok,epsilon_observed,epsilon_bound,gap_observed,gap_bound,gap_bound_printed\n";
  for (const auto& c : r.checks)
    out << num(c.alpha) << ',' << c.sample << ',' << (c.assumption_ok ? 1 : 0) << ',' << num(c.epsilon_observed) << ','
        << num(c.epsilon_bound) << ',' << num(c.gap.observed) << ',' << num(c.gap.bound) << ','
        << num(c.gap.bound_printed) << '\n';
}

// ---------------------------------------------------------------------------
// Bundles.

class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw InvalidParameter("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  template <class Writer>
  void write(const std::string& name, Writer&& w) {
    std::ofstream out(dir_ / name);
    if (!out) throw InvalidParameter("cannot write " + (dir_ / name).string());
    w(out);
    written_.push_back(name);
  }

  const std::filesystem::path& path() const { return dir_; }
  const std::vector<std::string>& written() const { return written_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> written_;
};

struct PipelineResult {
  Scenario scenario;
  UpperResult upper;
  std::vector<LowerCompany> lower;
  std::vector<MechanismRow> mechanisms;
  std::optional<SweepResult> robustness;
};

inline void write_simulation_outputs(OutputDir& dir, const Scenario& sc) {
  dir.write("snapshot.csv", [&](std::ostream& o) { write_snapshot(o, sc); });
  dir.write("simulation_summary.csv", [&](std::ostream& o) { write_simulation_summary(o, sc); });
  dir.write("speed_trace.csv", [&](std::ostream& o) { write_speed_trace(o, sc); });
}

inline void write_upper_outputs(OutputDir& dir, const Scenario& sc, const UpperResult& u) {
  dir.write("trace.csv", [&](std::ostream& o) { write_trace(o, u.report); });
  dir.write("prices.csv", [&](std::ostream& o) { write_prices(o, sc, u); });
}

/// Wall-clock figures are kept out of the CSVs so those stay reproducible.
inline void write_timing(OutputDir& dir, const UpperResult& u) {
  dir.write("timing.txt", [&](std::ostream& o) {
    o << "mechanism " << u.mechanism << "\nupper_level_seconds " << u.seconds << "\niterations "
      << u.report.iterations << "\nconverged " << (u.report.converged ? "yes" : "no") << '\n';
    if (u.grid_evaluations) o << "grid_evaluations " << u.grid_evaluations << '\n';
  });
}

/// Simulate, estimate, solve both levels, compare mechanisms and, when
/// enabled, run the robustness sweep. Every CSV lands in `out_dir`.
inline PipelineResult run_pipeline(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
  PipelineResult r;
  r.scenario = prepare(cfg);
  const auto& sc = r.scenario;
  r.upper = solve_upper(sc, cfg.mechanism);
  r.lower = solve_lower(sc, r.upper);
  r.mechanisms = compare_mechanisms(sc, cfg.mechanism == "rsg" ? &r.upper : nullptr);
  if (cfg.robustness) r.robustness = run_robustness(sc);

  OutputDir dir(out_dir);
  write_simulation_outputs(dir, sc);
  dir.write("parameters.csv", [&](std::ostream& o) { write_parameters(o, sc); });
  write_upper_outputs(dir, sc, r.upper);
  dir.write("mechanisms.csv", [&](std::ostream& o) { write_mechanisms(o, sc, r.mechanisms); });
  dir.write("surge.csv", [&](std::ostream& o) { write_surge(o, sc, r.lower); });
  dir.write("surge_summary.csv", [&](std::ostream& o) { write_surge_summary(o, sc, r.lower); });
  if (r.robustness) {
    dir.write("robustness.csv", [&](std::ostream& o) { write_robustness(o, *r.robustness); });
    dir.write("robustness_summary.csv", [&](std::ostream& o) { write_robustness_summary(o, *r.robustness); });
    dir.write("robustness_checks.csv", [&](std::ostream& o) { write_robustness_checks(o, *r.robustness); });
  }
  write_timing(dir, r.upper);
  return r;
}

}  // namespace fleetcharge
