#include <random>

#include <gtest/gtest.h>

#include "fleetcharge/equilibrium.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace fleetcharge;
using testing_support::generous_sets;
using testing_support::random_profile;
using testing_support::reference_game;

namespace {

DemandPerturbation small_perturbation(const GameInstance& g, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> w(0.0, 1.0);
  DemandPerturbation p = DemandPerturbation::none(g);
  for (std::size_t i = 0; i < g.num_companies(); ++i)
    for (Eigen::Index k = 0; k < p.delta[i].size(); ++k)
      if (g.companies[i].demand[k] > 0) p.delta[i][k] = scale * w(rng) / g.companies[i].demand[k];
  return p;
}

}  // namespace

TEST(PseudoGradient, AtZeroIsStackedLinearTerm) {
  const auto g = reference_game();
  const Vector f = pricing_game(g)(Vector::Zero(12));
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_TRUE(block(f, i, 4).isApprox(g.companies[i].fleet * g.objective.linear));
}

TEST(PseudoGradient, BlocksMatchFiniteDifferencesOfReducedCost) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto g = testing_support::random_instance(3, 4, 300 + t);
    const auto game = pricing_game(g);
    Vector x(12);
    for (std::size_t i = 0; i < 3; ++i) block(x, i, 4) = testing_support::random_simplex(4, rng);
    const Vector f = game(x);
    for (std::size_t i = 0; i < 3; ++i) {
      const Vector others = aggregate_except(x, g.fleets(), 4, i);
      const Vector xi = block(x, i, 4);
      for (Eigen::Index k = 0; k < 4; ++k) {
        const double h = 1e-5;
        Vector a = xi, b = xi;
        a[k] += h;
        b[k] -= h;
        const double fd = (reduced_cost(g, i, a, others) - reduced_cost(g, i, b, others)) / (2 * h);
        EXPECT_NEAR(f[static_cast<Eigen::Index>(i * 4) + k], fd, 1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST(PseudoGradient, PerturbedBlocksMatchFiniteDifferencesOfCompanyCost) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const auto g = testing_support::random_instance(3, 4, 700 + t);
    const auto p = small_perturbation(g, 0.05, 900 + static_cast<std::uint64_t>(t));
    const auto game = pricing_game(g, p);
    Vector x(12);
    for (std::size_t i = 0; i < 3; ++i) block(x, i, 4) = testing_support::random_simplex(4, rng);
    const Vector f = game(x);
    for (std::size_t i = 0; i < 3; ++i) {
      const Vector others = aggregate_except(x, g.fleets(), 4, i);
      const Vector xi = block(x, i, 4);
      auto cost = [&](const Vector& z) { return company_cost(g, i, z, others, approximate_policy(g, i, z, others, p.delta[i])); };
      for (Eigen::Index k = 0; k < 4; ++k) {
        const double h = 1e-5;
        Vector a = xi, b = xi;
        a[k] += h;
        b[k] -= h;
        const double fd = (cost(a) - cost(b)) / (2 * h);
        EXPECT_NEAR(f[static_cast<Eigen::Index>(i * 4) + k], fd, 1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST(PseudoGradient, ZeroPerturbationIsIdentical) {
  const auto g = reference_game();
  std::mt19937_64 rng(1);
  const auto sets = generous_sets(g);
  const Vector x = random_profile(sets, rng);
  EXPECT_TRUE(pricing_game(g, DemandPerturbation::none(g))(x).isApprox(pricing_game(g)(x), 1e-15));
}

TEST(PseudoGradient, KroneckerStructure) {
  const auto g = reference_game();
  const Matrix f1 = pricing_game(g).jacobian();
  const Vector n = g.fleets();
  Matrix kron = Matrix::Zero(12, 12);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      kron.block(4 * i, 4 * j, 4, 4) = (n[i] * n[j] * g.objective.weight).asDiagonal();
  EXPECT_LE((f1 - kron).cwiseAbs().maxCoeff(), 1e-15 * kron.cwiseAbs().maxCoeff());
  EXPECT_TRUE(pricing_game(g).constant().isApprox(pricing_game(g)(Vector::Zero(12))));
}

TEST(StepSize, SingleCompany) {
  const Vector n = (Vector(1) << 7).finished();
  EXPECT_DOUBLE_EQ(lambda_max_closed_form(n, (Diagonal(3) << 1, 4, 2).finished()), 49.0 * 4.0);
}

TEST(StepSize, TwoUnitCompanies) {
  const Vector n = (Vector(2) << 1, 1).finished();
  const Diagonal a = Diagonal::Constant(2, 2.0);
  EXPECT_DOUBLE_EQ(lambda_max_closed_form(n, a), 4.0);
  Matrix f = Matrix::Zero(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) f.block(2 * i, 2 * j, 2, 2) = a.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> es(f);
  EXPECT_NEAR(es.eigenvalues().maxCoeff(), 4.0, 1e-12);
  EXPECT_NEAR(2.0 / es.eigenvalues().maxCoeff(), 0.5, 1e-12);
}

TEST(StepSize, ClosedFormMatchesEigensolverOnReferenceGame) {
  const auto g = reference_game();
  Eigen::SelfAdjointEigenSolver<Matrix> es(pricing_game(g).jacobian());
  const double closed = lambda_max_closed_form(g.fleets(), g.objective.weight);
  EXPECT_NEAR(closed, es.eigenvalues().maxCoeff(), 1e-10 * closed);
}

TEST(StepSize, PerturbedUsesOperatorNorm) {
  const auto g = reference_game();
  const auto p = small_perturbation(g, 0.02, 5);
  const Matrix j = pricing_game(g, p).jacobian();
  const double sv = Eigen::JacobiSVD<Matrix>(j).singularValues()[0];
  EXPECT_NEAR(step_size_bound(g, p), 2.0 / sv, 1e-12);
  EXPECT_DOUBLE_EQ(step_size_bound(g, DemandPerturbation::none(g)), step_size_bound(g));
}

TEST(Solve, SingleCompanyOnSimplexReachesUniformPoint) {
  StationSet st{Vector::Constant(3, 10.0), Diagonal::Ones(3)};
  GameInstance g{st, {CompanyParams::make(5.0, Diagonal::Ones(3), Vector::Zero(3), st)},
                 GovernmentObjective::quadratic(Diagonal::Ones(3), Vector::Zero(3))};
  const auto rep = solve_nash(pricing_game(g), {simplex_polytope(3)}, g.objective, Vector::Unit(3, 0));
  ASSERT_TRUE(rep.converged);
  EXPECT_LE((rep.solution - Vector::Constant(3, 1.0 / 3.0)).norm(), 1e-7);
}

TEST(Solve, RejectsStepOutsideBound) {
  const auto g = reference_game();
  const auto sets = generous_sets(g);
  SolveOptions opt;
  opt.step = 1.01 * step_size_bound(g);
  EXPECT_THROW(solve_nash(pricing_game(g), sets, g.objective, default_start(sets), opt), InvalidParameter);
}

TEST(Solve, ReferenceGameReachesGovernmentOptimum) {
  const auto g = reference_game();
  const auto sets = generous_sets(g);
  const auto game = pricing_game(g);
  const auto rep = solve_nash(game, sets, g.objective, default_start(sets));
  EXPECT_LE(rep.government_cost.back(), 1e-4);
  EXPECT_LE(rep.iterations, 1000u);
  const auto qp = oracle::government_optimum(g, sets);
  ASSERT_TRUE(qp.converged);
  const double j_qp = government_cost(aggregate(qp.x, g.fleets(), 4), g.objective);
  EXPECT_LE(rep.government_cost.back() - j_qp, 1e-4 * std::max(1.0, j_qp));
  // Residual recomputed from scratch.
  EXPECT_LE(nash_residual(game, sets, rep.solution, rep.step), 1e-8);
  // Traces stay aligned.
  EXPECT_EQ(rep.iterates.size(), rep.government_cost.size());
  EXPECT_EQ(rep.iterates.size(), rep.residuals.size());
  EXPECT_EQ(rep.iterates.size(), rep.sigma.size());
}

// With restricted reach the set point is out of range; the solver still
// matches the QP oracle.
TEST(Solve, RestrictedReachMatchesQpOracle) {
  std::mt19937_64 rng(19);
  std::bernoulli_distribution reach(0.6);
  int checked = 0;
  for (int t = 0; t < 20; ++t) {
    const auto g = testing_support::random_instance(3, 4, 4000 + t);
    std::vector<AdmissiblePolytope> sets;
    for (const auto& c : g.companies) {
      std::vector<StationMask> masks;
      for (long v = 0; v < static_cast<long>(c.fleet); ++v) {
        StationMask s = 0;
        for (std::size_t j = 0; j < 4; ++j)
          if (reach(rng)) s |= StationMask{1} << j;
        masks.push_back(s ? s : StationMask{1});
      }
      sets.push_back(admissible_polytope(FleetReachability(4, masks)));
    }
    bool any_empty = false;
    for (const auto& s : sets) any_empty = any_empty || s.empty();
    if (any_empty) continue;
    SolveOptions opt;
    opt.max_iterations = 20000;
    opt.tolerance = 1e-10;
    const auto rep = solve_nash(pricing_game(g), sets, g.objective, default_start(sets), opt);
    const auto qp = oracle::government_optimum(g, sets);
    ASSERT_TRUE(qp.converged);
    const double j_qp = government_cost(aggregate(qp.x, g.fleets(), 4), g.objective);
    EXPECT_LE(std::abs(rep.government_cost.back() - j_qp), 1e-4 * std::max(1.0, j_qp));
    ++checked;
  }
  EXPECT_GT(checked, 5);
}

TEST(Residual, InteriorMinimiserHasZeroResidual) {
  // Single company, plain simplex, set point strictly inside.
  StationSet st{Vector::Constant(3, 10.0), Diagonal::Ones(3)};
  GameInstance g{st, {CompanyParams::make(6.0, Diagonal::Ones(3), Vector::Zero(3), st)},
                 GovernmentObjective::from_set_point((Diagonal(3) << 1, 2, 3).finished(), (Vector(3) << 1, 2, 3).finished())};
  const auto sets = std::vector<AdmissiblePolytope>{simplex_polytope(3)};
  const auto qp = oracle::government_optimum(g, sets);
  ASSERT_TRUE(qp.converged);
  const auto game = pricing_game(g);
  EXPECT_LE(nash_residual(game, sets, qp.x, 0.9 * step_size_bound(g)), 1e-9);
}

TEST(Residual, PositiveAwayFromEquilibrium) {
  const auto g = reference_game();
  const auto sets = generous_sets(g);
  std::mt19937_64 rng(8);
  const auto game = pricing_game(g);
  for (int t = 0; t < 20; ++t)
    EXPECT_GT(nash_residual(game, sets, random_profile(sets, rng), 0.9 * step_size_bound(g)), 0.0);
}

TEST(Solve, FejerMonotoneTowardFixedPoint) {
  const auto g = reference_game();
  const auto sets = generous_sets(g);
  const auto game = pricing_game(g);
  SolveOptions opt;
  opt.step_fraction = 0.99;
  opt.max_iterations = 1000;
  opt.tolerance = 0;
  const Vector x0 = default_start(sets);
  const auto rep = solve_nash(game, sets, g.objective, x0, opt);
  SolveOptions tight = opt;
  tight.max_iterations = 200000;
  tight.tolerance = 1e-15;
  const Vector xs = solve_nash(game, sets, g.objective, x0, tight).solution;
  for (std::size_t k = 0; k + 1 < rep.iterates.size(); ++k)
    EXPECT_LE((rep.iterates[k + 1] - xs).norm(), (rep.iterates[k] - xs).norm() + 1e-12) << "k = " << k;
}

TEST(Solve, AggregateIsUniqueAcrossStarts) {
  const auto g = reference_game();
  const auto sets = generous_sets(g);
  const auto game = pricing_game(g);
  std::mt19937_64 rng(10);
  Vector first;
  for (int t = 0; t < 10; ++t) {
    const auto rep = solve_nash(game, sets, g.objective, random_profile(sets, rng));
    const Vector s = rep.sigma.back();
    if (t == 0) first = s;
    EXPECT_LE((s - first).cwiseAbs().maxCoeff(), 1e-4);
  }
}

TEST(Solve, DeterministicTrace) {
  const auto g = reference_game();
  const auto sets = generous_sets(g);
  const auto a = solve_nash(pricing_game(g), sets, g.objective, default_start(sets));
  const auto b = solve_nash(pricing_game(g), sets, g.objective, default_start(sets));
  ASSERT_EQ(a.iterates.size(), b.iterates.size());
  for (std::size_t k = 0; k < a.iterates.size(); ++k) EXPECT_EQ(a.iterates[k], b.iterates[k]);
}
