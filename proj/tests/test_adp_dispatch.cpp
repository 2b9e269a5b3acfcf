#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mgopt/adp_dispatch.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace mgopt;

namespace {

AdpHorizon random_horizon(GaussianSource& g, const AdpDispatchConfig& cfg) { return fixture::adp_horizon(g, cfg); }

// Income of discharging -u Wh from x, priced from the fitted curves directly.
double discharge_value(double x, double u, double m, const AdpDispatchConfig& cfg)
{
    const auto& s = cfg.life;
    const double ah = -u / s.voltage;
    const double current = ah / cfg.step_hours;
    const double dod = std::clamp(1.0 - (x + u) / (s.voltage * s.c_r), 0.0, 1.0);
    const double eff = (s.l_r / cycle_life_at_dod(dod, s)) * (s.c_r / capacity_at_current(current, s)) * ah;
    return -u * m * 1e-6 - s.price * eff / (s.l_r * s.d_r * s.c_r);
}

TimeSeries ts(std::vector<double> v, Unit u) { return {0, 5.0, std::move(v), u}; }

}  // namespace

TEST(HarmonicStepsize, Values)
{
    EXPECT_EQ(harmonic_stepsize(1, 3.0, 0.7), 1.0);
    EXPECT_EQ(harmonic_stepsize(1, 0.1, 2.0), 1.0);
    EXPECT_DOUBLE_EQ(harmonic_stepsize(2, 1.0, 1.0), 0.5);
    double prev = 1.0;
    for (int n = 2; n < 2000; ++n) {
        const double a = harmonic_stepsize(n, 10.0, 0.6);
        EXPECT_LE(a, prev);
        EXPECT_GT(a, 0.0);
        prev = a;
    }
    EXPECT_THROW(harmonic_stepsize(0, 1.0, 1.0), std::invalid_argument);
}

TEST(RemainingEnergy, EmptyStoreIsWorthNothing)
{
    const AdpDispatchConfig cfg;
    EXPECT_EQ(remaining_energy_value(cfg.lb, 0.0, 75.0, cfg), 0.0);
    EXPECT_EQ(remaining_energy_value(cfg.lb + 1248, -1248, 75.0, cfg), 0.0);
}

TEST(RemainingEnergy, ZeroPriceLeavesOnlyCost)
{
    const AdpDispatchConfig cfg;
    for (double x = cfg.lb; x <= cfg.ub; x += 12480) EXPECT_LE(remaining_energy_value(x, 0.0, 0.0, cfg), 0.0);
    EXPECT_LT(remaining_energy_value(cfg.ub, 0.0, 0.0, cfg), 0.0);
}

TEST(RemainingEnergy, FullRangeMatchesThroughputCost)
{
    const AdpDispatchConfig cfg;
    const double wh = cfg.ub - cfg.lb;
    DischargeEvent ev{1.0 - cfg.lb / (cfg.life.voltage * cfg.life.c_r), cfg.life.c_r / 20.0, wh / cfg.life.voltage, 20.0};
    const double m = 83.0;
    EXPECT_NEAR(remaining_energy_value(cfg.ub, 0.0, m, cfg), m * wh * 1e-6 - throughput_operational_cost(ev, cfg.life), 1e-12);
}

TEST(BoundAction, ZeroPriceNeverDischarges)
{
    const AdpDispatchConfig cfg;
    for (int i = 0; i < cfg.states(); i += 7) EXPECT_EQ(bound_action(cfg.state(i), 0.0, cfg), 0.0);
}

TEST(BoundAction, HighPriceDischargesAtLimit)
{
    const AdpDispatchConfig cfg;
    const double h = cfg.state_step;
    EXPECT_EQ(bound_action(cfg.ub, 1e6, cfg), -h * cfg.max_discharge_steps());
    EXPECT_EQ(bound_action(cfg.lb + 2 * h, 1e6, cfg), -2 * h);
    EXPECT_EQ(bound_action(cfg.lb, 1e6, cfg), 0.0);
}

TEST(BoundAction, MatchesExhaustiveScan)
{
    const AdpDispatchConfig cfg;
    for (double m : {5.0, 30.0, 60.0, 90.0, 150.0, 400.0}) {
        for (int i = 0; i < cfg.states(); i += 3) {
            const double x = cfg.state(i);
            double best = 0.0, best_u = 0.0;
            for (int s = 1; s <= std::min(i, cfg.max_discharge_steps()); ++s) {
                const double v = discharge_value(x, -cfg.state_step * s, m, cfg);
                if (v > best + 1e-12 * std::max(1.0, std::abs(v))) {
                    best = v;
                    best_u = -cfg.state_step * s;
                }
            }
            EXPECT_EQ(bound_action(x, m, cfg), best_u) << "m=" << m << " x=" << x;
        }
    }
}

TEST(AdpSolver, SmoothingIsConvexCombination)
{
    AdpDispatchConfig cfg;
    GaussianSource g(2);
    AdpSolver solver(cfg, random_horizon(g, cfg));
    for (int trial = 0; trial < 200; ++trial) {
        const int k = trial % cfg.horizon, xi = (trial * 13) % cfg.states();
        const double old = solver.estimate(k, xi);
        const double obs = old + (g.uniform() - 0.5) * 10.0;
        const double a = g.uniform();
        solver.smooth(k, xi, obs, a);
        const double now = solver.table().value[solver.table().at(k, xi)];
        EXPECT_NEAR(now, (1 - a) * old + a * obs, 1e-12);
        EXPECT_GE(now, std::min(old, obs) - 1e-12);
        EXPECT_LE(now, std::max(old, obs) + 1e-12);
    }
}

TEST(AdpSolver, LazyValuesAreRollouts)
{
    AdpDispatchConfig cfg;
    GaussianSource g(3);
    AdpSolver solver(cfg, random_horizon(g, cfg));
    for (int xi = 0; xi < cfg.states(); xi += 11) EXPECT_EQ(solver.estimate(2, xi), solver.rollout_value(2, xi));
    EXPECT_EQ(solver.table().initialized[solver.table().at(2, 0)], 1);
    EXPECT_EQ(solver.table().initialized[solver.table().at(3, 0)], 0);
}

TEST(AdpSolver, GreedyObjectiveMatchesPlanEvaluation)
{
    AdpDispatchConfig cfg;
    GaussianSource g(4);
    const auto hz = random_horizon(g, cfg);
    AdpSolver solver(cfg, hz);
    const int x0 = cfg.states() / 2;
    solver.train(50, 1, x0);
    const auto plan = solver.greedy(x0);
    EXPECT_NEAR(plan.objective, evaluate_plan(hz, plan.actions, cfg.state(x0), cfg), 1e-12);
}

TEST(AdpSolver, TrainingIsDeterministic)
{
    AdpDispatchConfig cfg;
    cfg.sample_sigma_fraction = 0.1;
    cfg.max_iterations = 40;
    const auto w = synthesize_scenario(ScenarioKind::wind, 50, 1, {40, 20, 288, 0, 5, 0.9});
    const auto m = synthesize_scenario(ScenarioKind::price, 50, 2, {60, 20, 288, 0, 5, 0.9});
    EXPECT_EQ(adp_train(w, m, cfg, 9).value, adp_train(w, m, cfg, 9).value);
}

TEST(AdpSolver, TrainedGreedyNearExactLattice)
{
    double worst = 0.0;
    for (int seed = 0; seed < 30; ++seed) {
        AdpDispatchConfig cfg;
        GaussianSource g(static_cast<std::uint64_t>(seed));
        const auto hz = random_horizon(g, cfg);
        const int x0 = static_cast<int>(g.uniform() * cfg.states());
        const double exact = oracle::adp_exact(hz, cfg, x0);
        AdpSolver solver(cfg, hz);
        solver.train(500, static_cast<std::uint64_t>(seed), x0);
        const double got = solver.greedy(x0).objective;
        EXPECT_LE(got, exact + 1e-9 * std::abs(exact));
        const double gap = (exact - got) / std::abs(exact);
        worst = std::max(worst, gap);
        EXPECT_LE(gap, 0.02) << "seed " << seed;
    }
    RecordProperty("worst_gap", std::to_string(worst));
}

TEST(AdpRun, ZeroPriceNeverDischarges)
{
    AdpDispatchConfig cfg;
    cfg.max_iterations = 20;
    const auto w = synthesize_scenario(ScenarioKind::wind, 40, 1, {40, 20, 288, 0, 5, 0.9});
    const auto rep = adp_dispatch_run(w, ts(std::vector<double>(40, 0.0), Unit::currency_per_MWh), cfg, {0.0, 1}, 30);
    for (double u : rep.actions) EXPECT_GE(u, 0.0);
}

TEST(AdpRun, ConstraintsHoldAndBeatsFullCycling)
{
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        AdpDispatchConfig cfg;
        cfg.max_iterations = 100;
        cfg.x0 = cfg.state(cfg.states() / 2);
        SynthesisParams wp{40, 25, 288, 0, 12, 0.9};
        wp.upper = 72;
        const auto w = synthesize_scenario(ScenarioKind::wind, 200, derive_seed(seed, 1), wp);
        const auto m = synthesize_scenario(ScenarioKind::price, 200, derive_seed(seed, 2), {60, 25, 288, -90, 10, 0.7});
        const auto rep = adp_dispatch_run(w, m, cfg, {0.05, seed}, 120);
        ASSERT_EQ(rep.states.size(), 121u);
        for (std::size_t k = 0; k < rep.actions.size(); ++k) {
            EXPECT_GE(rep.grid_wh[k], -1e-9);
            EXPECT_GE(rep.states[k + 1], cfg.lb - 1e-6);
            EXPECT_LE(rep.states[k + 1], cfg.ub + 1e-6);
            EXPECT_GE(rep.actions[k], -cfg.r_d - 1e-9);
            EXPECT_LE(rep.actions[k], cfg.r_c + 1e-9);
        }
        EXPECT_GE(rep.additional_income, rep.baseline_additional_income) << "seed " << seed;
    }
}
