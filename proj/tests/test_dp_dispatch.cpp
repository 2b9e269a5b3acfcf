#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "mgopt/dp_dispatch.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace mgopt;

namespace {

TimeSeries series(std::vector<double> v, Unit u = Unit::kW) { return {0, 5.0, std::move(v), u}; }

using fixture::synthetic_day;

DispatchScenario random_instance(std::mt19937_64& rng, int N, int G) { return fixture::dispatch_instance(rng, N, G); }

}  // namespace

TEST(SolveHorizon, ZeroPricesIdle)
{
    std::mt19937_64 rng(1);
    auto sc = random_instance(rng, 5, 9);
    sc.price = series(std::vector<double>(sc.price.size(), 0.0), Unit::currency_per_MWh);
    sc.cycle.r_c = 1e6;
    const auto grid = energy_grid(sc.battery, sc.grid_points);
    const auto sol = solve_horizon(sc, grid[4], 0);
    EXPECT_EQ(sol.objective, 0.0);
    for (double a : sol.actions) EXPECT_EQ(a, 0.0);
}

TEST(SolveHorizon, MatchesEnumeration)
{
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> Nd(1, 6), Gd(2, 11);
    int checked = 0;
    for (int trial = 0; trial < 80; ++trial) {
        int N = Nd(rng), G = Gd(rng);
        while (std::pow(G, N) > 2e5) --N;
        const auto sc = random_instance(rng, N, G);
        const auto grid = energy_grid(sc.battery, G);
        // on-grid and off-grid starting points
        const double e0 = trial % 3 == 0 ? 1250 + 10000 * std::uniform_real_distribution<double>(0, 1)(rng)
                                         : grid[static_cast<std::size_t>(trial % G)];
        const double want = oracle::dispatch(sc, e0, 1);
        if (!std::isfinite(want)) {
            EXPECT_THROW(solve_horizon(sc, e0, 1), InfeasibleError);
            continue;
        }
        const auto sol = solve_horizon(sc, e0, 1);
        ASSERT_NEAR(sol.objective, want, 1e-9 * std::max(1.0, std::abs(want))) << "trial " << trial << " N=" << N << " G=" << G;
        ++checked;
    }
    EXPECT_GE(checked, 50);
}

TEST(SolveHorizon, ObjectiveEqualsOfflineAccounting)
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 40; ++trial) {
        const auto sc = random_instance(rng, 6, 11);
        const auto grid = energy_grid(sc.battery, 11);
        const auto sol = solve_horizon(sc, grid[static_cast<std::size_t>(trial % 11)], 0);
        EXPECT_NEAR(sol.objective, evaluate_path(sc, sol.energies, 0), 1e-9 * std::max(1.0, std::abs(sol.objective)));
    }
}

TEST(SolveHorizon, StatesAndActionsRespectLimits)
{
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        const auto sc = random_instance(rng, 6, 21);
        const auto& b = sc.battery;
        const auto sol = solve_horizon(sc, energy_grid(b, 21)[10], 0);
        ASSERT_EQ(sol.actions.size(), 6u);
        ASSERT_EQ(sol.energies.size(), 7u);
        for (std::size_t k = 0; k < sol.actions.size(); ++k) {
            EXPECT_GE(sol.energies[k + 1], b.e_min - 1e-9);
            EXPECT_LE(sol.energies[k + 1], b.e_cap_max + 1e-9);
            EXPECT_LE(sol.actions[k], b.p_discharge_max * (1 + 1e-9));
            EXPECT_GE(sol.actions[k], -b.p_charge_max * (1 + 1e-9));
            EXPECT_NEAR(battery_next_energy(sol.energies[k], sol.actions[k], b.delta_t, b.d_loss), sol.energies[k + 1], 1e-6);
        }
    }
}

TEST(SolveHorizon, TerminalValuesAreZero)
{
    std::mt19937_64 rng(5);
    const auto sc = random_instance(rng, 4, 7);
    const auto sol = solve_horizon(sc, energy_grid(sc.battery, 7)[3], 0);
    const auto& t = sol.table;
    for (int j = 0; j < t.grid; ++j) EXPECT_EQ(t.value[static_cast<std::size_t>(t.stages) * t.grid + j], 0.0);
}

TEST(SolveHorizon, SingleSigmaIsNeverBetter)
{
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 40; ++trial) {
        const auto sc = random_instance(rng, 6, 11);
        const double e0 = energy_grid(sc.battery, 11)[static_cast<std::size_t>(trial % 11)];
        const auto exact = solve_horizon(sc, e0, 0);
        const auto single = solve_horizon(sc, e0, 0, ExtremeMode::single_sigma);
        EXPECT_GE(evaluate_path(sc, single.energies, 0), exact.objective - 1e-9 * std::max(1.0, std::abs(exact.objective)));
    }
}

TEST(SolveHorizon, FreeCyclingChargesEarlySellsLate)
{
    DispatchScenario sc;
    const int N = 6;
    sc.horizon_steps = N;
    sc.grid_points = 11;
    sc.battery = {12500, 1250, 11250, 24000, 24000, 0.05, 1.0 / 12.0, 1};
    sc.cycle.r_c = 0.0;
    sc.renewable = series(std::vector<double>(N, 50000.0));
    sc.load = series(std::vector<double>(N, 10000.0));
    sc.price = series({40, 60, 80, 100, 120, 400}, Unit::currency_per_MWh);
    const auto sol = solve_horizon(sc, 1250, 0);
    EXPECT_NEAR(sol.objective, oracle::dispatch(sc, 1250, 0), 1e-9 * std::abs(sol.objective));
    // buys at the cheapest step and sells into the spike
    EXPECT_LT(sol.actions.front(), 0.0);
    EXPECT_GT(sol.actions.back(), 0.0);
}

TEST(SolveHorizon, RejectsStartOutsideBounds)
{
    std::mt19937_64 rng(8);
    const auto sc = random_instance(rng, 3, 5);
    EXPECT_THROW(solve_horizon(sc, 12000.0, 0), InfeasibleError);
}

TEST(RecedingHorizon, NoNoiseAppliesFirstPlannedAction)
{
    const auto sc = synthetic_day(2, 30000, 20000, 8, 8, 11);
    const double e0 = energy_grid(sc.battery, 11)[5];
    const auto single = solve_horizon(sc, e0, 0);
    const auto rep = receding_horizon_run(sc, e0, 1, {0.0, 1});
    ASSERT_EQ(rep.executed_actions.size(), 1u);
    EXPECT_EQ(rep.executed_actions[0], single.actions[0]);
    EXPECT_EQ(rep.trajectory[1], single.energies[1]);
    EXPECT_EQ(rep.planning.overall_cost, rep.actual.overall_cost);
}

TEST(RecedingHorizon, DeterministicForFixedSeed)
{
    const auto sc = synthetic_day(3, 30000, 20000, 24, 12, 11);
    const auto a = receding_horizon_run(sc, 10000, 24, {0.05, 9});
    const auto b = receding_horizon_run(sc, 10000, 24, {0.05, 9});
    EXPECT_EQ(a.trajectory, b.trajectory);
    EXPECT_EQ(a.actual.overall_cost, b.actual.overall_cost);
}

TEST(RecedingHorizon, NeverWorseThanNoStorageOnPlanningData)
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const double load = 15000 + 2000 * static_cast<double>(seed);
        const auto sc = synthetic_day(seed, load, 25000, 48, 12, 11);
        const auto rep = receding_horizon_run(sc, 6250, 48, {0.05, seed});
        EXPECT_LE(rep.planning.overall_cost, rep.planning.baseline_cost + 1e-6) << "seed " << seed;
    }
}

TEST(RecedingHorizon, CostSignFollowsDemandBalance)
{
    const auto high = receding_horizon_run(synthetic_day(1, 35000, 20000, 96, 12, 11), 10000, 96, {0.05, 1});
    const auto low = receding_horizon_run(synthetic_day(2, 15000, 28000, 96, 12, 11), 10000, 96, {0.05, 2});
    EXPECT_GT(high.actual.overall_cost, 0.0);
    EXPECT_GT(high.actual.baseline_cost, 0.0);
    EXPECT_LT(low.actual.overall_cost, 0.0);
    EXPECT_LT(low.actual.baseline_cost, 0.0);
    EXPECT_GT(high.actual.improvement_percent(), 0.0);
    EXPECT_GT(low.actual.improvement_percent(), 0.0);
}

TEST(RunStart, FindsLastMonotoneRun)
{
    EXPECT_FALSE(run_start({5.0}).has_value());
    EXPECT_FALSE(run_start({5.0, 5.0, 5.0}).has_value());
    EXPECT_EQ(*run_start({5.0, 6.0, 7.0}), 5.0);
    EXPECT_EQ(*run_start({5.0, 8.0, 6.0, 6.0, 4.0}), 8.0);
    EXPECT_EQ(*run_start({9.0, 3.0, 3.0, 7.0, 7.0}), 3.0);
}

TEST(SolveHorizon, OpenHalfCycleRaisesContinuationCost)
{
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        const auto sc = random_instance(rng, 5, 9);
        const auto grid = energy_grid(sc.battery, 9);
        const double e0 = grid[4];
        const auto fresh = solve_horizon(sc, e0, 0);
        // no open run: identical problem
        EXPECT_EQ(solve_horizon(sc, e0, 0, ExtremeMode::exact, e0).objective, fresh.objective);
        // an open run can only make continuing dearer
        EXPECT_GE(solve_horizon(sc, e0, 0, ExtremeMode::exact, grid[0]).objective, fresh.objective - 1e-9 * std::abs(fresh.objective));
        EXPECT_GE(solve_horizon(sc, e0, 0, ExtremeMode::exact, grid[8]).objective, fresh.objective - 1e-9 * std::abs(fresh.objective));
    }
}
