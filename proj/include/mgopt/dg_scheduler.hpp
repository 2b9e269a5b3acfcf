#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgopt/battery.hpp"
#include "mgopt/common.hpp"
#include "mgopt/tcl.hpp"
#include "mgopt/timeseries.hpp"

namespace mgopt {

struct DgParams {
    double a = 0.01;
    double b = 0.1;
    double c = 0.0;
    double p_min = 50.0;
    double p_max = 500.0;

    double cost(double p) const { return a * p * p + b * p + c; }
};

/// Storage for the islanded scheduler. p_min is the (negative) charge limit,
/// p_max the discharge limit; both may be 0 to disable the unit.
struct SchedulerBess {
    double gamma1 = 0.008;
    double gamma2 = 0.008;
    double p_min = -120.0;
    double p_max = 120.0;
    double x_min = 24.0;
    double x_max = 216.0;
    double delta_t = 1.0 / 6.0;
    double d_loss = 0.05;
};

struct SchedulerParams {
    DgParams dg;
    SchedulerBess bess;
    double eps_tolerance = 1.05;
    double c_cur = 60.0;
    int grid_points = 49;

    std::vector<std::string> diagnostics() const
    {
        std::vector<std::string> out;
        if (!(dg.p_min <= dg.p_max)) out.push_back("scheduler: dg p_min must not exceed p_max");
        if (!(dg.a >= 0.0 && dg.b >= 0.0 && dg.c >= 0.0)) out.push_back("scheduler: dg cost coefficients must be non-negative");
        if (!(bess.p_min <= 0.0 && 0.0 <= bess.p_max)) out.push_back("scheduler: need bess p_min <= 0 <= p_max");
        if (!(bess.x_min < bess.x_max)) out.push_back("scheduler: need bess x_min < x_max");
        if (!(bess.gamma1 >= 0.0 && bess.gamma2 >= 0.0)) out.push_back("scheduler: gamma1, gamma2 must be non-negative");
        if (!(bess.delta_t > 0.0)) out.push_back("scheduler: delta_t must be positive");
        if (!(bess.d_loss >= 0.0 && bess.d_loss < 1.0)) out.push_back("scheduler: d_loss must lie in [0, 1)");
        if (!(eps_tolerance > 1.0)) out.push_back("scheduler: eps_tolerance must exceed 1, the load tolerance requires epsilon > 1 so demand can absorb surplus");
        if (!(c_cur >= 0.0)) out.push_back("scheduler: c_cur must be non-negative");
        if (grid_points < 2) out.push_back("scheduler: grid_points must be >= 2");
        return out;
    }

    void validate() const
    {
        const auto d = diagnostics();
        if (!d.empty()) throw std::invalid_argument(d.front());
    }
};

/// Surplus that neither the loads (up to eps*demand) nor the storage charge
/// headroom d_max_c can absorb.
inline double curtailment(double pg_min, double p_s, double demand, double eps, double d_max_c)
{
    return std::max(0.0, pg_min + p_s - eps * demand - d_max_c);
}

struct DgDispatch {
    double p_g = 0.0;
    double p_cur = 0.0;
};

/// Cheapest DG output for a fixed storage action so that
/// demand <= P_G + P_s + P_B <= eps*demand; surplus beyond the band at
/// minimum DG output is curtailed. Empty when demand cannot be met.
inline std::optional<DgDispatch> dispatch_dg(double p_b, double demand, double p_s, const SchedulerParams& sp)
{
    const double lo_need = demand - p_s - p_b;
    const double hi_allow = sp.eps_tolerance * demand - p_s - p_b;
    const double tol = 1e-9 * std::max(1.0, sp.dg.p_max);
    if (lo_need > sp.dg.p_max + tol) return std::nullopt;
    DgDispatch d;
    if (hi_allow < sp.dg.p_min) {
        d.p_g = sp.dg.p_min;
        d.p_cur = sp.dg.p_min - hi_allow;
        return d;
    }
    const double lo = std::max(sp.dg.p_min, lo_need);
    const double hi = std::min(sp.dg.p_max, hi_allow);
    const double vertex = sp.dg.a > 0.0 ? -sp.dg.b / (2.0 * sp.dg.a) : (sp.dg.b >= 0.0 ? lo : hi);
    d.p_g = std::clamp(vertex, lo, std::max(lo, hi));
    return d;
}

inline double scheduler_stage_cost(double x, double p_b, const DgDispatch& d, const SchedulerParams& sp)
{
    return sp.dg.cost(d.p_g) + sp.bess.gamma1 * std::abs(p_b * sp.bess.delta_t) + sp.bess.gamma2 * x + sp.c_cur * d.p_cur;
}

inline std::vector<double> scheduler_grid(const SchedulerParams& sp)
{
    std::vector<double> g(static_cast<std::size_t>(sp.grid_points));
    const double h = (sp.bess.x_max - sp.bess.x_min) / (sp.grid_points - 1);
    for (int i = 0; i < sp.grid_points; ++i) g[static_cast<std::size_t>(i)] = sp.bess.x_min + h * i;
    g.back() = sp.bess.x_max;
    return g;
}

struct DgSchedule {
    std::vector<double> p_g;
    std::vector<double> p_b;
    std::vector<double> p_cur;
    std::vector<double> x;  ///< N + 1 states
    std::vector<double> demand;
    std::vector<double> stage_cost;
    double objective = 0.0;
};

namespace detail {

inline bool scheduler_power_ok(double p, const SchedulerBess& b)
{
    const double slack = 1e-9 * std::max({1.0, std::abs(b.p_min), std::abs(b.p_max)});
    return p >= b.p_min - slack && p <= b.p_max + slack;
}

}  // namespace detail

/// Forecast demand per stage from the outdoor temperature.
inline std::vector<double> demand_forecast(const TimeSeries& t_out, std::size_t k0, int N, const TclParams& tcl)
{
    std::vector<double> d;
    for (int k = 0; k < N; ++k) d.push_back(aggregate_demand(t_out[k0 + static_cast<std::size_t>(k)], tcl.band_high, tcl));
    return d;
}

/// Bellman recursion over the storage energy grid; for each storage action
/// the DG output is optimal in closed form.
inline DgSchedule schedule_dg_bess(const std::vector<double>& solar, const std::vector<double>& demand, const SchedulerParams& sp, double x0, int N)
{
    sp.validate();
    if (N < 1) throw std::invalid_argument("schedule_dg_bess: N must be >= 1");
    if (solar.size() < static_cast<std::size_t>(N) || demand.size() < static_cast<std::size_t>(N))
        throw std::out_of_range("schedule_dg_bess: forecasts shorter than the horizon");
    const double xtol = 1e-9 * std::max(1.0, sp.bess.x_max);
    if (x0 < sp.bess.x_min - xtol || x0 > sp.bess.x_max + xtol) throw InfeasibleError("schedule_dg_bess: x0 outside storage bounds");

    const auto grid = scheduler_grid(sp);
    const int G = static_cast<int>(grid.size());
    const auto& bb = sp.bess;
    std::vector<double> V(static_cast<std::size_t>(N + 1) * G, kInf);
    std::vector<int> succ(static_cast<std::size_t>(N) * G, -1);
    for (int i = 0; i < G; ++i) V[static_cast<std::size_t>(N) * G + i] = 0.0;

    struct Choice {
        double cost = kInf;
        double p = 0.0;
        int j = -1;
    };
    auto best_from = [&](int k, double x) {
        Choice best;
        for (int j = 0; j < G; ++j) {
            const double vn = V[static_cast<std::size_t>(k + 1) * G + j];
            if (!std::isfinite(vn)) continue;
            const double p = power_for_transition(x, grid[j], bb.delta_t, bb.d_loss);
            if (!detail::scheduler_power_ok(p, bb)) continue;
            const auto d = dispatch_dg(p, demand[static_cast<std::size_t>(k)], solar[static_cast<std::size_t>(k)], sp);
            if (!d) continue;
            const double c = scheduler_stage_cost(x, p, *d, sp) + vn;
            const bool take = best.j < 0 || (nearly_equal(c, best.cost) ? detail::prefer_smaller(p, best.p) : c < best.cost);
            if (take) best = {c, p, j};
        }
        return best;
    };
    for (int k = N - 1; k >= 1; --k)
        for (int i = 0; i < G; ++i) {
            const Choice c = best_from(k, grid[i]);
            V[static_cast<std::size_t>(k) * G + i] = c.cost;
            succ[static_cast<std::size_t>(k) * G + i] = c.j;
        }
    const Choice root = best_from(0, x0);
    if (root.j < 0) throw InfeasibleError("schedule_dg_bess: no feasible (P_G, P_B) pair keeps the demand band over the horizon");

    DgSchedule out;
    out.objective = root.cost;
    out.x.push_back(x0);
    double x = x0;
    int j = root.j;
    for (int k = 0; k < N; ++k) {
        const double xn = grid[static_cast<std::size_t>(j)];
        const double p = power_for_transition(x, xn, bb.delta_t, bb.d_loss);
        const auto d = *dispatch_dg(p, demand[static_cast<std::size_t>(k)], solar[static_cast<std::size_t>(k)], sp);
        out.p_b.push_back(p);
        out.p_g.push_back(d.p_g);
        out.p_cur.push_back(d.p_cur);
        out.demand.push_back(demand[static_cast<std::size_t>(k)]);
        out.stage_cost.push_back(scheduler_stage_cost(x, p, d, sp));
        out.x.push_back(xn);
        x = xn;
        if (k + 1 < N) j = succ[static_cast<std::size_t>(k + 1) * G + j];
    }
    return out;
}

/// One-step policy: the grid transition with the cheapest immediate cost.
inline std::optional<double> greedy_storage_action(double x, double demand, double solar, const SchedulerParams& sp)
{
    const auto grid = scheduler_grid(sp);
    std::optional<double> best_p;
    double best = kInf;
    for (double xn : grid) {
        const double p = power_for_transition(x, xn, sp.bess.delta_t, sp.bess.d_loss);
        if (!detail::scheduler_power_ok(p, sp.bess)) continue;
        const auto d = dispatch_dg(p, demand, solar, sp);
        if (!d) continue;
        const double c = scheduler_stage_cost(x, p, *d, sp);
        if (!best_p || (nearly_equal(c, best) ? detail::prefer_smaller(p, *best_p) : c < best)) {
            best = c;
            best_p = p;
        }
    }
    return best_p;
}

enum class SchedulerPolicy { dynamic_programming, greedy };

struct DgRunReport {
    std::vector<double> p_g, p_b, p_cur, x, demand, solar, stage_cost;
    double total_cost = 0.0;
    double dg_cost = 0.0;
    double bess_cost = 0.0;
    double curtailment_cost = 0.0;
    int unmet_steps = 0;
};

/// Receding-horizon execution on actual data with forecasts perturbed by err.
/// The storage action comes from the plan; DG output is re-optimised for the
/// actual demand and solar power.
inline DgRunReport dg_receding_run(const TimeSeries& solar, const TimeSeries& t_out, const SchedulerParams& sp, const TclParams& tcl, double x0,
                                   int N, std::size_t total_steps, const ForecastErrorSpec& err, SchedulerPolicy policy)
{
    sp.validate();
    tcl.validate();
    if (total_steps + static_cast<std::size_t>(N) > std::min(solar.size(), t_out.size()))
        throw std::out_of_range("dg_receding_run: total_steps + horizon exceeds data length");
    const TimeSeries solar_fc = inject_forecast_error(solar, {err.sigma_fraction, derive_seed(err.seed, 0)});
    TimeSeries t_fc = inject_forecast_error(t_out, {err.sigma_fraction, derive_seed(err.seed, 1)});
    for (double& t : t_fc.values) t = std::max(t, tcl.band_high);

    DgRunReport rep;
    double x = x0;
    rep.x.push_back(x);
    const auto& bb = sp.bess;
    for (std::size_t k = 0; k < total_steps; ++k) {
        std::vector<double> s_fc(solar_fc.values.begin() + static_cast<std::ptrdiff_t>(k),
                                 solar_fc.values.begin() + static_cast<std::ptrdiff_t>(k) + N);
        const auto d_fc = demand_forecast(t_fc, k, N, tcl);
        double p_b = 0.0;
        if (policy == SchedulerPolicy::dynamic_programming) {
            p_b = schedule_dg_bess(s_fc, d_fc, sp, x, N).p_b.front();
        } else {
            const auto g = greedy_storage_action(x, d_fc.front(), s_fc.front(), sp);
            if (!g) throw InfeasibleError("dg_receding_run: greedy policy found no feasible action");
            p_b = *g;
        }
        const double demand = aggregate_demand(std::max(t_out[k], tcl.band_high), tcl.band_high, tcl);
        auto d = dispatch_dg(p_b, demand, solar[k], sp);
        if (!d) {
            d = DgDispatch{sp.dg.p_max, 0.0};
            ++rep.unmet_steps;
        }
        const double c = scheduler_stage_cost(x, p_b, *d, sp);
        rep.dg_cost += sp.dg.cost(d->p_g);
        rep.bess_cost += bb.gamma1 * std::abs(p_b * bb.delta_t) + bb.gamma2 * x;
        rep.curtailment_cost += sp.c_cur * d->p_cur;
        rep.total_cost += c;
        rep.p_b.push_back(p_b);
        rep.p_g.push_back(d->p_g);
        rep.p_cur.push_back(d->p_cur);
        rep.demand.push_back(demand);
        rep.solar.push_back(solar[k]);
        rep.stage_cost.push_back(c);
        x = std::clamp(battery_next_energy(x, p_b, bb.delta_t, bb.d_loss), bb.x_min, bb.x_max);
        rep.x.push_back(x);
    }
    return rep;
}

}  // namespace mgopt
