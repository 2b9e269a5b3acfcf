#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgopt/battery.hpp"
#include "mgopt/common.hpp"
#include "mgopt/tcl.hpp"
#include "mgopt/timeseries.hpp"

namespace mgopt {

/// Power in kW, ramp limits in kW per step, temperatures in degC.
struct SmoothingParams {
    double gamma_b = 0.048;
    double rr_min = -20000.0;
    double rr_max = 20000.0;
    double band_low = 20.0;
    double band_high = 25.0;
    double qp_tolerance = 1e-10;
    int qp_max_iters = 2'000'000;
    int grid_points = 49;

    std::vector<std::string> diagnostics() const
    {
        std::vector<std::string> out;
        if (!(gamma_b >= 0.0)) out.push_back("smoothing: gamma_b must be non-negative");
        if (!(rr_min <= 0.0 && 0.0 <= rr_max)) out.push_back("smoothing: need rr_min <= 0 <= rr_max");
        if (!(band_low < band_high)) out.push_back("smoothing: need band_low < band_high");
        if (!(qp_tolerance > 0.0)) out.push_back("smoothing: qp_tolerance must be positive");
        if (qp_max_iters < 1) out.push_back("smoothing: qp_max_iters must be >= 1");
        if (grid_points < 2) out.push_back("smoothing: grid_points must be >= 2");
        return out;
    }

    void validate() const
    {
        const auto d = diagnostics();
        if (!d.empty()) throw std::invalid_argument(d.front());
    }
};

/// Wind power net of the TCL consumption: w - n/beta * (T_out - D).
inline double regulated_wind(double wind, double t_out, double setpoint, const TclParams& tcl)
{
    return wind - tcl.demand_gain() * (t_out - setpoint);
}

inline double variation_objective(const std::vector<double>& y)
{
    double s = 0.0;
    for (std::size_t t = 1; t < y.size(); ++t) s += (y[t] - y[t - 1]) * (y[t] - y[t - 1]);
    return s;
}

struct SetpointPlan {
    std::vector<double> setpoints;
    std::vector<double> pw_tcl;
    double objective = 0.0;
    double midpoint_objective = 0.0;  ///< constant band midpoint, projected into the box
    int iterations = 0;
};

/// Per-stage box for the setpoint: the comfort band, capped by T_out so the
/// TCL demand stays non-negative.
inline std::pair<double, double> setpoint_box(double t_out, const SmoothingParams& sm)
{
    if (t_out < sm.band_low) throw std::domain_error("smooth_setpoints: outdoor temperature below the comfort band");
    return {sm.band_low, std::min(sm.band_high, t_out)};
}

/// Minimises sum (y_{t+1} - y_t)^2 over the setpoints by projected gradient
/// with step 1/L, L = 8 c^2 bounding the Hessian 2 c^2 * (path Laplacian).
inline SetpointPlan smooth_setpoints(const std::vector<double>& wind, const std::vector<double>& t_out, const TclParams& tcl,
                                     const SmoothingParams& sm)
{
    sm.validate();
    tcl.validate();
    const std::size_t N = wind.size();
    if (N < 2) throw std::invalid_argument("smooth_setpoints: N must be >= 2");
    if (t_out.size() != N) throw std::invalid_argument("smooth_setpoints: wind and temperature lengths differ");

    const double c = tcl.demand_gain();
    std::vector<double> lo(N), hi(N);
    for (std::size_t t = 0; t < N; ++t) std::tie(lo[t], hi[t]) = setpoint_box(t_out[t], sm);

    auto outputs = [&](const std::vector<double>& D) {
        std::vector<double> y(N);
        for (std::size_t t = 0; t < N; ++t) y[t] = regulated_wind(wind[t], t_out[t], D[t], tcl);
        return y;
    };

    std::vector<double> D(N);
    const double mid = 0.5 * (sm.band_low + sm.band_high);
    for (std::size_t t = 0; t < N; ++t) D[t] = std::clamp(mid, lo[t], hi[t]);

    SetpointPlan plan;
    plan.midpoint_objective = variation_objective(outputs(D));

    const double step = 1.0 / (8.0 * c * c);
    std::vector<double> y = outputs(D);
    std::vector<double> grad(N);
    bool converged = false;
    int it = 0;
    while (it < sm.qp_max_iters) {
        ++it;
        for (std::size_t t = 0; t < N; ++t) {
            double g = 0.0;
            if (t > 0) g += y[t] - y[t - 1];
            if (t + 1 < N) g -= y[t + 1] - y[t];
            grad[t] = 2.0 * c * g;
        }
        double moved = 0.0;
        for (std::size_t t = 0; t < N; ++t) {
            const double nd = std::clamp(D[t] - step * grad[t], lo[t], hi[t]);
            moved = std::max(moved, std::abs(nd - D[t]));
            D[t] = nd;
        }
        y = outputs(D);
        if (moved < sm.qp_tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NumericalError("smooth_setpoints: projected gradient did not converge within qp_max_iters");
    plan.iterations = it;
    plan.setpoints = D;
    plan.pw_tcl = y;
    plan.objective = variation_objective(y);
    return plan;
}

struct BessSmoothing {
    std::vector<double> p_b;       ///< N actions
    std::vector<double> p_g;       ///< P_G(t+1) = P_B(t) + pw_tcl(t), N values
    std::vector<double> energies;  ///< N + 1 states
    double cost = 0.0;
};

namespace detail {

inline bool bess_power_ok(double p, const BatterySpec& b)
{
    const double slack = 1e-9 * std::max({1.0, b.p_charge_max, b.p_discharge_max});
    return p <= b.p_discharge_max + slack && p >= -b.p_charge_max - slack;
}

inline bool ramp_ok(double dpg, const SmoothingParams& sm)
{
    const double slack = 1e-9 * std::max({1.0, -sm.rr_min, sm.rr_max});
    return dpg >= sm.rr_min - slack && dpg <= sm.rr_max + slack;
}

}  // namespace detail

inline std::vector<double> smoothing_grid(const BatterySpec& b, int points)
{
    std::vector<double> g(static_cast<std::size_t>(points));
    const double h = (b.e_cap_max - b.e_min) / (points - 1);
    for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = b.e_min + h * i;
    g.back() = b.e_cap_max;
    return g;
}

/// Cheapest storage schedule keeping every dispatched ramp inside
/// [rr_min, rr_max]. DP state is (previous energy, energy) since the ramp
/// couples consecutive actions.
inline BessSmoothing smooth_bess(const std::vector<double>& pw_tcl, const SmoothingParams& sm, const BatterySpec& bess, double e0, double pg_prev)
{
    sm.validate();
    bess.validate();
    const int N = static_cast<int>(pw_tcl.size());
    if (N < 1) throw std::invalid_argument("smooth_bess: empty power series");
    const double etol = 1e-9 * std::max(1.0, bess.e_max);
    if (e0 < bess.e_min - etol || e0 > bess.e_cap_max + etol) throw InfeasibleError("smooth_bess: e0 outside storage bounds");

    const auto grid = smoothing_grid(bess, sm.grid_points);
    const int G = static_cast<int>(grid.size());
    const double dt = bess.delta_t, d = bess.d_loss;

    std::vector<double> P(static_cast<std::size_t>(G) * G);
    std::vector<char> pok(P.size());
    for (int i = 0; i < G; ++i)
        for (int j = 0; j < G; ++j) {
            const std::size_t at = static_cast<std::size_t>(i) * G + j;
            P[at] = power_for_transition(grid[i], grid[j], dt, d);
            pok[at] = detail::bess_power_ok(P[at], bess);
        }

    // V[t][i_prev*G + i]: cost-to-go at stage t >= 1 from energy grid[i],
    // arrived at from grid[i_prev] during stage t-1.
    std::vector<std::vector<double>> V(static_cast<std::size_t>(N + 1));
    std::vector<std::vector<int>> succ(static_cast<std::size_t>(N + 1));
    V[static_cast<std::size_t>(N)].assign(P.size(), 0.0);

    struct Choice {
        double cost = kInf;
        double p = 0.0;
        int j = -1;
    };
    auto best_from_impl = [&](auto& self, int t, double pg_t, double x, int i) -> Choice {
        Choice best;
        const auto& Vn = V[static_cast<std::size_t>(t + 1)];
        const double w = pw_tcl[static_cast<std::size_t>(t)];
        for (int j = 0; j < G; ++j) {
            double p;
            std::size_t at = 0;
            if (i >= 0) {
                at = static_cast<std::size_t>(i) * G + j;
                if (!pok[at]) continue;
                p = P[at];
            } else {
                p = power_for_transition(x, grid[j], dt, d);
                if (!detail::bess_power_ok(p, bess)) continue;
            }
            if (p + w < -1e-9 * std::max(1.0, std::abs(w))) continue;
            if (!detail::ramp_ok(p + w - pg_t, sm)) continue;
            double vn = 0.0;
            if (t + 1 < N) {
                // off-grid root: the stage-1 value depends on the dispatched P_G(1)
                vn = i >= 0 ? Vn[at] : self(self, t + 1, p + w, grid[static_cast<std::size_t>(j)], j).cost;
                if (!std::isfinite(vn)) continue;
            }
            const double c = sm.gamma_b * std::abs(p * dt) + sm.gamma_b * x + vn;
            const bool take = best.j < 0 || (nearly_equal(c, best.cost) ? detail::prefer_smaller(p, best.p) : c < best.cost);
            if (take) best = {c, p, j};
        }
        return best;
    };
    auto best_from = [&](int t, double pg_t, double x, int i) { return best_from_impl(best_from_impl, t, pg_t, x, i); };

    for (int t = N - 1; t >= 1; --t) {
        auto& Vt = V[static_cast<std::size_t>(t)];
        auto& St = succ[static_cast<std::size_t>(t)];
        Vt.assign(P.size(), kInf);
        St.assign(P.size(), -1);
        for (int ip = 0; ip < G; ++ip)
            for (int i = 0; i < G; ++i) {
                const std::size_t at = static_cast<std::size_t>(ip) * G + i;
                if (!pok[at]) continue;
                const double pg_t = P[at] + pw_tcl[static_cast<std::size_t>(t - 1)];
                const Choice c = best_from(t, pg_t, grid[i], i);
                Vt[at] = c.cost;
                St[at] = c.j;
            }
    }

    const Choice root = best_from(0, pg_prev, e0, -1);
    if (root.j < 0) throw InfeasibleError("smooth_bess: ramp limits cannot be met with the available storage");

    BessSmoothing out;
    out.cost = root.cost;
    out.energies.push_back(e0);
    out.p_b.push_back(root.p);
    out.p_g.push_back(root.p + pw_tcl[0]);
    out.energies.push_back(grid[static_cast<std::size_t>(root.j)]);
    int prev = root.j;
    int cur = N > 1 ? best_from(1, out.p_g.front(), grid[static_cast<std::size_t>(root.j)], root.j).j : -1;
    for (int t = 1; t < N; ++t) {
        const std::size_t at = static_cast<std::size_t>(prev) * G + cur;
        out.p_b.push_back(P[at]);
        out.p_g.push_back(P[at] + pw_tcl[static_cast<std::size_t>(t)]);
        out.energies.push_back(grid[static_cast<std::size_t>(cur)]);
        if (t + 1 < N) {
            const int nxt = succ[static_cast<std::size_t>(t + 1)][at];
            prev = cur;
            cur = nxt;
        }
    }
    return out;
}

struct SmoothingRunReport {
    std::vector<double> raw_wind, pw_tcl, p_g, delta_pg, p_b, x, setpoints;
    double raw_variation = 0.0;       ///< sum of squared raw wind ramps
    double dispatched_variation = 0.0;
    double storage_cost = 0.0;
    int ramp_violations = 0;
    int raw_ramp_violations = 0;
    int infeasible_plans = 0;
};

/// Rolling two-stage pipeline: setpoints and storage are planned on forecast
/// windows of length N and the first actions are applied to actual data.
inline SmoothingRunReport wind_smoothing_run(const TimeSeries& wind, const TimeSeries& t_out, const TclParams& tcl, const SmoothingParams& sm,
                                             const BatterySpec& bess, double e0, double pg_prev0, int N, std::size_t total_steps,
                                             const ForecastErrorSpec& err)
{
    sm.validate();
    tcl.validate();
    bess.validate();
    if (N < 2) throw std::invalid_argument("wind_smoothing_run: N must be >= 2");
    if (total_steps + static_cast<std::size_t>(N) > std::min(wind.size(), t_out.size()))
        throw std::out_of_range("wind_smoothing_run: total_steps + horizon exceeds data length");
    const TimeSeries w_fc = inject_forecast_error(wind, {err.sigma_fraction, derive_seed(err.seed, 0)});
    TimeSeries t_fc = inject_forecast_error(t_out, {err.sigma_fraction, derive_seed(err.seed, 1)});
    for (double& t : t_fc.values) t = std::max(t, sm.band_low);

    SmoothingRunReport rep;
    double x = e0;
    double pg_prev = pg_prev0;
    double raw_prev = wind[0];
    rep.x.push_back(x);
    const double dt = bess.delta_t, d = bess.d_loss;
    for (std::size_t k = 0; k < total_steps; ++k) {
        const auto off = static_cast<std::ptrdiff_t>(k);
        std::vector<double> wf(w_fc.values.begin() + off, w_fc.values.begin() + off + N);
        std::vector<double> tf(t_fc.values.begin() + off, t_fc.values.begin() + off + N);
        const SetpointPlan sp = smooth_setpoints(wf, tf, tcl, sm);

        const double ds = sp.setpoints.front();
        const double t_act = t_out[k];
        const double pw_act = wind[k] - tcl.demand_gain() * std::max(0.0, t_act - ds);

        double target;
        try {
            const BessSmoothing plan = smooth_bess(sp.pw_tcl, sm, bess, x, pg_prev);
            target = plan.p_g.front();
        } catch (const InfeasibleError&) {
            ++rep.infeasible_plans;
            target = std::clamp(pw_act, pg_prev + sm.rr_min, pg_prev + sm.rr_max);
        }
        const double p_dis = std::min(bess.p_discharge_max, std::max(0.0, (x - bess.e_min) / (dt * (1.0 + d))));
        const double p_ch = std::min(bess.p_charge_max, std::max(0.0, (bess.e_cap_max - x) / (dt * (1.0 - d))));
        double p_b = std::clamp(target - pw_act, -p_ch, p_dis);
        if (p_b + pw_act < 0.0) p_b = std::min(p_dis, -pw_act);
        const double pg = std::max(0.0, p_b + pw_act);
        const double dpg = pg - pg_prev;
        if (!detail::ramp_ok(dpg, sm)) ++rep.ramp_violations;
        if (!detail::ramp_ok(wind[k] - raw_prev, sm)) ++rep.raw_ramp_violations;
        rep.raw_variation += (wind[k] - raw_prev) * (wind[k] - raw_prev);
        rep.dispatched_variation += dpg * dpg;
        rep.storage_cost += sm.gamma_b * std::abs(p_b * dt) + sm.gamma_b * x;

        rep.raw_wind.push_back(wind[k]);
        rep.pw_tcl.push_back(pw_act);
        rep.p_g.push_back(pg);
        rep.delta_pg.push_back(dpg);
        rep.p_b.push_back(p_b);
        rep.setpoints.push_back(ds);
        x = std::clamp(battery_next_energy(x, p_b, dt, d), bess.e_min, bess.e_cap_max);
        rep.x.push_back(x);
        pg_prev = pg;
        raw_prev = wind[k];
    }
    return rep;
}

}  // namespace mgopt
