#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "mgopt/adp_dispatch.hpp"
#include "mgopt/dg_scheduler.hpp"
#include "mgopt/dp_dispatch.hpp"
#include "mgopt/network_adp.hpp"
#include "mgopt/smoothing.hpp"

namespace fixture {

/// First reference microgrid plus the CEMS, short horizon.
inline mgopt::NetworkConfig single_microgrid(int horizon)
{
    auto full = mgopt::reference_network({400, 300, 350});
    mgopt::NetworkConfig cfg;
    cfg.mgs = {full.mgs[0]};
    cfg.cems = full.cems;
    cfg.horizon = horizon;
    return cfg;
}

/// Random deterministic path for one microgrid: price per kWh, renewable and load in kW.
inline mgopt::NetworkPath single_path(std::uint64_t seed, int N)
{
    mgopt::NetworkPath p;
    mgopt::GaussianSource g(seed);
    for (int t = 0; t < N; ++t) p.ep.push_back(0.1 + 0.08 * g.uniform());
    p.res.emplace_back();
    p.load.emplace_back();
    for (int t = 0; t < N; ++t) {
        p.res[0].push_back(50 + 60 * g.uniform());
        p.load[0].push_back(250 + 100 * g.uniform());
    }
    return p;
}

/// Training setup for the deterministic small-lattice comparison.
inline mgopt::NetworkAdpParams small_lattice_params()
{
    mgopt::NetworkAdpParams prm;
    prm.levels = 3;
    prm.iterations = 2000;
    prm.sample_sigma_fraction = 0.0;
    prm.lambda = 0.99;
    return prm;
}

/// Random dispatch instance: kWh store with random rate limits and loss, flat-ish series.
inline mgopt::DispatchScenario dispatch_instance(std::mt19937_64& rng, int N, int G)
{
    using namespace mgopt;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    DispatchScenario sc;
    sc.horizon_steps = N;
    sc.grid_points = G;
    sc.battery = {12500, 1250, 11250, 6000 + 40000 * u01(rng), 6000 + 40000 * u01(rng), 0.02 + 0.08 * u01(rng), 1.0 / 12.0,
                  1 + static_cast<int>(4 * u01(rng))};
    sc.cycle = {2347.0, 1.0 + u01(rng), 2.5e6 * u01(rng)};
    std::vector<double> r, l, p;
    for (int k = 0; k < N + 2; ++k) {
        r.push_back(40000 * u01(rng));
        l.push_back(40000 * u01(rng));
        p.push_back(20 + 280 * u01(rng));
    }
    sc.renewable = {0, 5.0, r, Unit::kW};
    sc.load = {0, 5.0, l, Unit::kW};
    sc.price = {0, 5.0, p, Unit::currency_per_MWh};
    return sc;
}

/// Synthetic receding-horizon day with a 12.5 MWh store.
inline mgopt::DispatchScenario synthetic_day(std::uint64_t seed, double load_mean, double ren_mean, int steps, int horizon, int G)
{
    using namespace mgopt;
    DispatchScenario sc;
    const int L = steps + horizon;
    sc.renewable = synthesize_scenario(ScenarioKind::wind, L, derive_seed(seed, 10), {ren_mean, 6000, 288, 0, 2500, 0.95});
    sc.load = synthesize_scenario(ScenarioKind::load, L, derive_seed(seed, 11), {load_mean, 8000, 288, -72, 800, 0.9});
    sc.price = synthesize_scenario(ScenarioKind::price, L, derive_seed(seed, 12), {80, 20, 288, -90, 3, 0.95});
    sc.battery = {12500, 1250, 11250, 24000, 24000, 0.05, 1.0 / 12.0, 5};
    sc.horizon_steps = horizon;
    sc.grid_points = G;
    return sc;
}

/// Random DG, storage and tolerance parameters for the scheduler.
inline mgopt::SchedulerParams scheduler_params(std::mt19937_64& rng, int G)
{
    using namespace mgopt;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SchedulerParams sp;
    sp.dg = {0.002 + 0.02 * u(rng), 0.3 * u(rng), 5 * u(rng), 20 + 60 * u(rng), 300 + 300 * u(rng)};
    const double rate = 60 + 600 * u(rng);
    sp.bess = {0.02 * u(rng), 0.02 * u(rng), -rate, rate * (0.5 + u(rng)), 24.0, 216.0, 1.0 / 6.0, 0.05};
    sp.eps_tolerance = 1.01 + 0.2 * u(rng);
    sp.c_cur = 100 * u(rng);
    sp.grid_points = G;
    return sp;
}

/// Wind-site population: 0.3 degC/kW, 320 units.
inline mgopt::TclParams wind_tcl() { return {0.5, 0.3, 0.1, 320, 20, 25, 0}; }

/// Small store so several grid steps are reachable per interval.
inline mgopt::BatterySpec small_store() { return {12000, 1000, 11000, 30000, 30000, 0.05, 1.0 / 6.0, 1}; }

struct QpInstance {
    std::vector<double> wind, t_out;
};

/// Wind around 60-100 MW and outdoor temperatures mostly above the comfort band.
inline QpInstance qp_instance(mgopt::GaussianSource& g, int N)
{
    QpInstance q;
    double w = 60000 + 40000 * g.uniform();
    for (int t = 0; t < N; ++t) {
        w = std::max(0.0, w + 6000 * g.normal());
        q.wind.push_back(w);
        // sometimes inside the band so the upper bound moves
        q.t_out.push_back(g.uniform() < 0.2 ? 20.0 + 5.0 * g.uniform() : 26.0 + 14.0 * g.uniform());
    }
    return q;
}

/// Deterministic storage-site horizon: wind up to 6 kWh per step, prices with occasional spikes.
inline mgopt::AdpHorizon adp_horizon(mgopt::GaussianSource& g, const mgopt::AdpDispatchConfig& cfg)
{
    mgopt::AdpHorizon hz;
    for (int t = 0; t < cfg.horizon; ++t) {
        hz.wind_wh.push_back(g.uniform() * 6000);
        hz.price.push_back(40 + (g.uniform() < 0.4 ? 300 * g.uniform() : 60 * g.uniform()));
    }
    hz.m_rm = 60 + 60 * g.uniform();
    return hz;
}

}  // namespace fixture
