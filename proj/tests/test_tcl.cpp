#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mgopt/tcl.hpp"

using namespace mgopt;

namespace {

TimeSeries temps(std::vector<double> v, double step_minutes = 10.0) { return {0, step_minutes, std::move(v), Unit::celsius}; }

// Scheduling-site population with the 0.2-step actuation delay.
TclParams delayed()
{
    TclParams p;
    p.switch_delay_steps = 2;
    return p;
}

}  // namespace

TEST(AggregateDemand, Values)
{
    const TclParams p;
    EXPECT_EQ(aggregate_demand(23.0, 23.0, p), 0.0);
    EXPECT_NEAR(aggregate_demand(33.0, 23.0, p), 106.67, 0.01);
    EXPECT_NEAR(aggregate_demand(33.0, 23.0, p), 3200.0 * 10.0 / 300.0, 1e-12);
    EXPECT_THROW(aggregate_demand(20.0, 23.0, p), std::domain_error);
}

TEST(AggregateDemand, LinearInPopulationAndGap)
{
    TclParams p;
    const double base = aggregate_demand(30.0, 23.0, p);
    EXPECT_NEAR(aggregate_demand(37.0, 23.0, p), 2.0 * base, 1e-12);
    p.n_units *= 3;
    EXPECT_NEAR(aggregate_demand(30.0, 23.0, p), 3.0 * base, 1e-12);
    EXPECT_NEAR(aggregate_demand(30.0, 23.0, std::vector<TclParams>{TclParams{}, TclParams{}}), 2.0 * base, 1e-12);
}

TEST(SimulateTcl, SwitchedOffRelaxesToOutdoor)
{
    const TclParams p;
    const auto tr = simulate_tcl(20.0, temps(std::vector<double>(600, 31.0)), 23.0, p, 10, 0);
    EXPECT_NEAR(tr.temperature.back(), 31.0, 1e-6);
    for (std::size_t j = 1; j < tr.temperature.size(); ++j) EXPECT_GE(tr.temperature[j], tr.temperature[j - 1]);
    for (double d : tr.duty) EXPECT_EQ(d, 0.0);
}

TEST(SimulateTcl, RejectsCoarseSubsteps)
{
    TclParams p;
    p.alpha = 10.0;
    EXPECT_THROW(simulate_tcl(25.0, temps({30.0, 30.0}, 60.0), 23.0, p, 1), std::invalid_argument);
}

TEST(SimulateTcl, StaysInChatteringBandAfterCrossing)
{
    GaussianSource g(31);
    const double sp = 23.0;
    for (int trial = 0; trial < 120; ++trial) {
        TclParams p = delayed();
        p.switch_delay_steps = trial % 4;
        std::vector<double> t_out;
        double ar = 0.0;
        const double mean = 28.0 + 12.0 * g.uniform();
        for (int k = 0; k < 144; ++k) {
            ar = 0.9 * ar + 0.8 * g.normal();
            t_out.push_back(std::clamp(mean + 4.0 * std::sin(k * 0.0436) + ar, sp, 45.0));
        }
        const double t0 = 15.0 + 20.0 * g.uniform();
        const auto tr = simulate_tcl(t0, temps(t_out), sp, p, 10);
        const double band = chattering_band(p, *std::max_element(t_out.begin(), t_out.end()), sp, tr.dt_hours);
        const bool from_above = t0 >= sp;
        std::size_t j = 0;
        while (j < tr.temperature.size() && (from_above ? tr.temperature[j] > sp : tr.temperature[j] < sp)) ++j;
        ASSERT_LT(j, tr.temperature.size()) << "never reached the setpoint, trial " << trial;
        for (; j < tr.temperature.size(); ++j) {
            ASSERT_LE(tr.temperature[j], sp + band + 1e-12) << "trial " << trial << " j " << j;
            ASSERT_GE(tr.temperature[j], sp - band - 1e-12) << "trial " << trial << " j " << j;
        }
    }
}

TEST(SimulateTcl, LongRunDutyMatchesDemand)
{
    const TclParams p = delayed();
    for (double t_out = 30.0; t_out <= 45.0; t_out += 1.0) {
        const auto tr = simulate_tcl(23.0, temps(std::vector<double>(1000, t_out)), 23.0, p, 10);
        double duty = 0.0;
        for (std::size_t k = 100; k < tr.duty.size(); ++k) duty += tr.duty[k];
        duty /= static_cast<double>(tr.duty.size() - 100);
        const double expected = (t_out - 23.0) / (p.beta * p.p_rated);
        EXPECT_NEAR(duty, expected, 0.03 * expected) << "t_out " << t_out;
        // population power equals the aggregate demand
        EXPECT_NEAR(duty * p.p_rated * p.n_units, aggregate_demand(t_out, 23.0, p), 0.03 * aggregate_demand(t_out, 23.0, p));
    }
}

TEST(SimulateTcl, SetpointSeriesMustMatchLength)
{
    const TclParams p;
    EXPECT_THROW(simulate_tcl(25.0, temps({30.0, 30.0, 30.0}), std::vector<double>{23.0, 23.0}, p, 10), std::invalid_argument);
}
