// Command-line front end. Exit codes: 0 ok, 1 invalid input, 2 infeasible
// scenario, 3 numerical failure.

#include <cctype>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fleetcharge.hpp"

namespace fc = fleetcharge;

namespace {

struct CommonArgs {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed, sim_seed, demand_seed, profit_seed, sweep_seed, surge_seed;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("-c,--config", a.config, "scenario JSON")->required();
  cmd->add_option("-o,--out", a.out, "output directory");
  cmd->add_option("--seed", a.seed, "master seed; streams without an explicit seed derive from it");
  cmd->add_option("--sim-seed", a.sim_seed, "simulation stream");
  cmd->add_option("--demand-seed", a.demand_seed, "generated demand");
  cmd->add_option("--profit-seed", a.profit_seed, "profit noise");
  cmd->add_option("--sweep-seed", a.sweep_seed, "robustness sweep");
  cmd->add_option("--surge-seed", a.surge_seed, "surge price search");
}

fc::ScenarioConfig load(const CommonArgs& a) {
  auto cfg = fc::load_config(a.config);
  auto& s = cfg.seeds;
  if (a.seed) {
    // A new master seed re-derives every stream the overrides below leave alone.
    s = fc::Seeds{};
    s.master = *a.seed;
  }
  if (a.sim_seed) s.simulation = *a.sim_seed;
  if (a.demand_seed) s.demand = *a.demand_seed;
  if (a.profit_seed) s.profit = *a.profit_seed;
  if (a.sweep_seed) s.sweep = *a.sweep_seed;
  if (a.surge_seed) s.surge = *a.surge_seed;
  return cfg;
}

std::string file_safe(const std::string& name) {
  std::string s = name;
  for (char& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
  return s;
}

void print_upper(const fc::UpperResult& u) {
  std::printf("%s: J_G = %s after %zu iterations (%s), %.3f s\n", u.mechanism.c_str(), fc::num(u.j_g()).c_str(),
              u.report.iterations, u.report.converged ? "converged" : "iteration cap", u.seconds);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Charging price coordination for ride-hailing fleets"};
  app.require_subcommand(1);

  CommonArgs common;
  auto* simulate = app.add_subcommand("simulate", "simulate the operating period and estimate game parameters");
  auto* upper = app.add_subcommand("solve-upper", "solve the company game under the chosen mechanism");
  auto* lower = app.add_subcommand("solve-lower", "upper level, then surge prices per company");
  auto* baseline = app.add_subcommand("baseline", "Nash equilibria under fixed price vectors");
  auto* grid = app.add_subcommand("grid-search", "search fixed prices on a grid");
  auto* robust = app.add_subcommand("robustness", "sweep demand misestimation levels");
  auto* pipeline = app.add_subcommand("pipeline", "run every stage and write all outputs");
  for (auto* cmd : {simulate, upper, lower, baseline, grid, robust, pipeline}) add_common(cmd, common);

  std::string mechanism;
  std::vector<double> price;
  upper->add_option("-m,--mechanism", mechanism, "rsg | fixed-price | grid-search");
  upper->add_option("--price", price, "fixed price vector")->delimiter(',');
  lower->add_option("-m,--mechanism", mechanism, "rsg | fixed-price | grid-search");
  lower->add_option("--price", price, "fixed price vector")->delimiter(',');
  baseline->add_option("--price", price, "one price vector instead of the configured baselines")->delimiter(',');
  std::optional<double> p_max;
  std::optional<std::size_t> resolution, refine, samples;
  std::vector<double> alphas;
  grid->add_option("--p-max", p_max, "upper price bound");
  grid->add_option("--resolution", resolution, "points per station axis");
  grid->add_option("--refine", refine, "refinement passes around the incumbent");
  robust->add_option("--samples", samples, "samples per alpha");
  robust->add_option("--alphas", alphas, "misestimation levels")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    auto cfg = load(common);
    if (!mechanism.empty()) cfg.mechanism = mechanism;
    if (!price.empty()) {
      cfg.fixed_price = Eigen::Map<const fc::Vector>(price.data(), static_cast<Eigen::Index>(price.size()));
      if (mechanism.empty() && (*upper || *lower)) cfg.mechanism = "fixed-price";
    }
    if (p_max) cfg.grid_p_max = *p_max;
    if (resolution) cfg.grid_resolution = *resolution;
    if (refine) cfg.grid_refine = *refine;
    if (samples) cfg.samples = *samples;
    if (!alphas.empty()) cfg.alphas = alphas;
    cfg.validate();

    if (*pipeline) {
      const auto r = fc::run_pipeline(cfg, common.out);
      print_upper(r.upper);
      for (const auto& row : r.mechanisms) std::printf("  %-12s J_G = %s\n", row.name.c_str(), fc::num(row.j_g).c_str());
      for (std::size_t i = 0; i < r.lower.size(); ++i)
        std::printf("  company %zu surge: %s, J_M = %s\n", i + 1, fc::to_string(r.lower[i].surge.mode),
                    fc::num(r.lower[i].surge.cost).c_str());
      std::printf("outputs in %s\n", common.out.c_str());
      return 0;
    }

    fc::OutputDir dir(common.out);
    if (*simulate) {
      const auto sc = fc::prepare(cfg);
      fc::write_simulation_outputs(dir, sc);
      dir.write("parameters.csv", [&](std::ostream& o) { fc::write_parameters(o, sc); });
      std::printf("vehicles needing charge:");
      for (long n : sc.snapshot.needing) std::printf(" %ld", n);
      std::printf("  (served %zu, unserved %zu)\n", sc.snapshot.served, sc.snapshot.unserved);
    } else if (*upper || *lower) {
      const auto sc = fc::prepare(cfg);
      const auto u = fc::solve_upper(sc, cfg.mechanism);
      fc::write_upper_outputs(dir, sc, u);
      fc::write_timing(dir, u);
      print_upper(u);
      if (*lower) {
        const auto l = fc::solve_lower(sc, u);
        dir.write("surge.csv", [&](std::ostream& o) { fc::write_surge(o, sc, l); });
        dir.write("surge_summary.csv", [&](std::ostream& o) { fc::write_surge_summary(o, sc, l); });
        for (std::size_t i = 0; i < l.size(); ++i)
          std::printf("company %zu surge: %s (%s), J_M = %s\n", i + 1, fc::to_string(l[i].surge.mode),
                      l[i].surge.solver.c_str(), fc::num(l[i].surge.cost).c_str());
      }
    } else if (*baseline) {
      const auto sc = fc::prepare(cfg);
      std::vector<fc::NamedPrice> list = cfg.baselines;
      if (!price.empty()) list = {{"custom", cfg.fixed_price}};
      std::vector<fc::MechanismRow> rows;
      for (const auto& b : list) {
        const auto r = fc::fixed_price_nash(sc.game, sc.sets, b.price, fc::solve_options(cfg));
        rows.push_back({b.name, b.price, r.government_cost.back(), r.sigma.back(), r.iterations, r.converged});
        dir.write("trace_" + file_safe(b.name) + ".csv", [&](std::ostream& o) { fc::write_trace(o, r); });
        std::printf("%s: J_G = %s\n", b.name.c_str(), fc::num(rows.back().j_g).c_str());
      }
      dir.write("mechanisms.csv", [&](std::ostream& o) { fc::write_mechanisms(o, sc, rows); });
    } else if (*grid) {
      const auto sc = fc::prepare(cfg);
      fc::GridSearchResult gs;
      const auto u = fc::solve_upper(sc, "grid-search", &gs);
      fc::write_upper_outputs(dir, sc, u);
      dir.write("grid_search.csv", [&](std::ostream& o) { fc::write_grid_points(o, gs); });
      fc::write_timing(dir, u);
      print_upper(u);
      std::printf("best price: %s\n", fc::join(gs.best_price).c_str());
    } else if (*robust) {
      const auto sc = fc::prepare(cfg);
      const auto r = fc::run_robustness(sc);
      dir.write("robustness.csv", [&](std::ostream& o) { fc::write_robustness(o, r); });
      dir.write("robustness_summary.csv", [&](std::ostream& o) { fc::write_robustness_summary(o, r); });
      dir.write("robustness_checks.csv", [&](std::ostream& o) { fc::write_robustness_checks(o, r); });
      for (const auto& [key, mean] : r.means())
        std::printf("alpha %-5s %-10s mean J_G = %s\n", fc::num(key.first).c_str(), key.second.c_str(),
                    fc::num(mean).c_str());
    }
    return 0;
  } catch (const fc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return fc::exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
