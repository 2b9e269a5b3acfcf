#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mgopt/battery.hpp"
#include "mgopt/common.hpp"
#include "mgopt/timeseries.hpp"

namespace mgopt {

/// Arbitrage problem for a renewable plant with n identical batteries trading
/// with the market. Power series are in kW, prices per MWh, battery in kW/kWh.
struct DispatchScenario {
    TimeSeries renewable;
    TimeSeries load;
    TimeSeries price;
    BatterySpec battery;
    CycleCostParams cycle;
    int horizon_steps = 24;
    int grid_points = 41;

    std::vector<std::string> diagnostics() const
    {
        std::vector<std::string> out;
        for (auto& d : battery.diagnostics()) out.push_back(d);
        for (auto& d : cycle.diagnostics()) out.push_back(d);
        if (horizon_steps < 1) out.push_back("dispatch: horizon_steps must be >= 1");
        if (grid_points < 2) out.push_back("dispatch: grid_points must be >= 2");
        if (renewable.empty() || load.empty() || price.empty()) out.push_back("dispatch: empty series");
        if (renewable.step_minutes != load.step_minutes || renewable.step_minutes != price.step_minutes)
            out.push_back("dispatch: series step lengths differ");
        return out;
    }

    void validate() const
    {
        const auto d = diagnostics();
        if (!d.empty()) throw std::invalid_argument(d.front());
    }

    std::size_t data_length() const { return std::min({renewable.size(), load.size(), price.size()}); }
};

/// Exact mode keys the value table by the subsequent extreme as well as the
/// state, which makes the recursion exact for any kp. single_sigma keeps one
/// extreme per state, as in the classic formulation; it is a feasible policy
/// whose objective is never below the exact one.
enum class ExtremeMode { exact, single_sigma };

struct ExtremeTable {
    int stages = 0;
    int grid = 0;
    std::vector<double> value;        ///< (stages + 1) x grid
    std::vector<double> sigma;        ///< (stages + 1) x grid
    std::vector<double> best_action;  ///< stages x grid, NaN when no feasible action

    double v(int k, int i) const { return value[static_cast<std::size_t>(k) * grid + i]; }
    double s(int k, int i) const { return sigma[static_cast<std::size_t>(k) * grid + i]; }
    double action(int k, int i) const { return best_action[static_cast<std::size_t>(k) * grid + i]; }
};

struct HorizonSolution {
    std::vector<double> actions;   ///< per-battery P_B, kW
    std::vector<double> energies;  ///< N + 1 states starting at e0
    double objective = 0.0;
    ExtremeTable table;
};

inline std::vector<double> energy_grid(const BatterySpec& b, int points)
{
    if (points < 2) throw std::invalid_argument("energy_grid: need at least 2 points");
    std::vector<double> g(static_cast<std::size_t>(points));
    const double h = (b.e_cap_max - b.e_min) / (points - 1);
    for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = b.e_min + h * i;
    g.back() = b.e_cap_max;
    return g;
}

/// P_G = P_rn - P_ld + n * P_B.
inline double grid_exchange(double renewable, double load, double p_b, int n_parallel)
{
    return renewable - load + n_parallel * p_b;
}

/// Market cost of exchanging p_grid kW for one step at price per MWh; selling is negative.
inline double trading_cost(double price, double p_grid) { return -price * p_grid / 1000.0; }

namespace detail {

/// Preference between two candidate actions with equal objective: idle
/// first, then smaller magnitude, then discharge over charge.
inline bool better(double cost, double action, double best_cost, double best_action)
{
    if (!std::isfinite(best_cost)) return std::isfinite(cost);
    if (nearly_equal(cost, best_cost, 1e-12)) return prefer_smaller(action, best_action);
    return cost < best_cost;
}

struct DispatchLattice {
    std::vector<double> grid;
    std::vector<double> half_cost;  ///< cost of a half cycle spanning m grid steps
    double slack = 0.0;

    DispatchLattice(const DispatchScenario& sc)
    {
        grid = energy_grid(sc.battery, sc.grid_points);
        half_cost.resize(grid.size());
        for (std::size_t m = 0; m < grid.size(); ++m) {
            const double d = std::abs(grid[m] - grid[0]) / sc.battery.e_max;
            half_cost[m] = m == 0 ? 0.0 : sc.cycle.unit_cost() * std::pow(d, sc.cycle.kp);
        }
        slack = 1e-9 * std::max(sc.battery.p_charge_max, sc.battery.p_discharge_max);
    }

    bool power_ok(double p, const BatterySpec& b) const { return p <= b.p_discharge_max + slack && p >= -b.p_charge_max - slack; }
};

inline std::optional<int> snap_to_grid(const std::vector<double>& grid, double e)
{
    const double tol = 1e-9 * std::max(1.0, std::abs(grid.back()));
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (std::abs(grid[i] - e) <= tol) return static_cast<int>(i);
    return std::nullopt;
}

}  // namespace detail

/// Finite-horizon minimisation of sum n*C_loss(k) - C_ele(k)*P_G(k) from
/// stage k0 with the battery at e0. e0 may sit between grid points; every
/// later state lies on the uniform grid over [e_min, e_cap_max].
/// run_start is where the battery's current monotone run began. When given,
/// a first step that continues that run is charged the growth of the open
/// half cycle rather than a fresh one.
inline HorizonSolution solve_horizon(const DispatchScenario& sc, double e0, std::size_t k0, ExtremeMode mode = ExtremeMode::exact,
                                     std::optional<double> run_start = std::nullopt)
{
    sc.validate();
    const BatterySpec& b = sc.battery;
    const double etol = 1e-9 * std::max(1.0, b.e_max);
    if (e0 < b.e_min - etol || e0 > b.e_cap_max + etol)
        throw InfeasibleError("solve_horizon: initial energy " + format_double(e0) + " outside [" + format_double(b.e_min) + ", " +
                              format_double(b.e_cap_max) + "]");
    const int N = sc.horizon_steps;
    if (k0 + static_cast<std::size_t>(N) > sc.data_length()) throw std::out_of_range("solve_horizon: horizon exceeds data");

    const detail::DispatchLattice lat(sc);
    const auto& grid = lat.grid;
    const int G = static_cast<int>(grid.size());
    const int n = b.n_parallel;
    const double unit = sc.cycle.unit_cost();
    const double kp = sc.cycle.kp;

    auto stage_trade = [&](int k, double p_b) {
        const std::size_t t = k0 + static_cast<std::size_t>(k);
        return trading_cost(sc.price[t], grid_exchange(sc.renewable[t], sc.load[t], p_b, n));
    };
    // per-transition power, NaN when outside the rate limits
    std::vector<double> power(static_cast<std::size_t>(G) * G);
    for (int i = 0; i < G; ++i)
        for (int j = 0; j < G; ++j) {
            const double p = power_for_transition(grid[i], grid[j], b);
            power[static_cast<std::size_t>(i) * G + j] = lat.power_ok(p, b) ? p : std::numeric_limits<double>::quiet_NaN();
        }
    auto hc = [&](int a, int c) { return lat.half_cost[static_cast<std::size_t>(std::abs(a - c))]; };

    const auto root_idx = detail::snap_to_grid(grid, e0);
    const double e_root = root_idx ? grid[static_cast<std::size_t>(*root_idx)] : e0;
    auto depth_cost = [&](double a, double c) { return unit * std::pow(std::abs(a - c) / b.e_max, kp); };
    const int open_dir = run_start ? direction(*run_start, e_root) : 0;
    auto root_loss = [&](double e_next, double sigma) {
        const int dir = direction(e_root, e_next);
        if (dir == 0) return 0.0;
        if (dir == open_dir) return depth_cost(*run_start, sigma) - depth_cost(*run_start, e_root) - depth_cost(e_next, sigma);
        return depth_cost(e_root, sigma) - depth_cost(e_next, sigma);
    };

    HorizonSolution sol;
    ExtremeTable& tab = sol.table;
    tab.stages = N;
    tab.grid = G;
    tab.value.assign(static_cast<std::size_t>(N + 1) * G, kInf);
    tab.sigma.assign(static_cast<std::size_t>(N + 1) * G, std::numeric_limits<double>::quiet_NaN());
    tab.best_action.assign(static_cast<std::size_t>(N) * G, std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i < G; ++i) {
        tab.value[static_cast<std::size_t>(N) * G + i] = 0.0;
        tab.sigma[static_cast<std::size_t>(N) * G + i] = grid[static_cast<std::size_t>(i)];
    }

    if (mode == ExtremeMode::exact) {
        // W[k][i][s]: best cost from stage k at grid i whose subsequent extreme is grid s
        const std::size_t GG = static_cast<std::size_t>(G) * G;
        std::vector<double> W(static_cast<std::size_t>(N + 1) * GG, kInf);
        std::vector<int> next_j(static_cast<std::size_t>(N) * GG, -1), next_s(static_cast<std::size_t>(N) * GG, -1);
        std::vector<double> next_p(static_cast<std::size_t>(N) * GG, 0.0);
        for (int i = 0; i < G; ++i) W[static_cast<std::size_t>(N) * GG + static_cast<std::size_t>(i) * G + i] = 0.0;

        for (int k = N - 1; k >= 1; --k) {
            double* Wk = &W[static_cast<std::size_t>(k) * GG];
            const double* Wn = &W[static_cast<std::size_t>(k + 1) * GG];
            for (int i = 0; i < G; ++i) {
                double* row = Wk + static_cast<std::size_t>(i) * G;
                for (int j = 0; j < G; ++j) {
                    const double p = power[static_cast<std::size_t>(i) * G + j];
                    if (std::isnan(p)) continue;
                    const double trade = stage_trade(k, p);
                    const int dir1 = (j > i) - (j < i);
                    const double* wrow = Wn + static_cast<std::size_t>(j) * G;
                    for (int s2 = 0; s2 < G; ++s2) {
                        const double wv = wrow[s2];
                        if (!std::isfinite(wv)) continue;
                        const int dir2 = (s2 > j) - (s2 < j);
                        const int s = (dir1 != 0 && dir2 != 0 && dir1 != dir2) ? j : s2;
                        const double loss = dir1 == 0 ? 0.0 : hc(i, s) - hc(j, s);
                        const double c = n * loss + trade + wv;
                        const std::size_t at = static_cast<std::size_t>(i) * G + s;
                        const std::size_t slot = static_cast<std::size_t>(k) * GG + at;
                        if (next_j[slot] < 0 || detail::better(c, p, Wk[at], next_p[slot])) {
                            row[s] = c;
                            next_j[slot] = j;
                            next_s[slot] = s2;
                            next_p[slot] = p;
                        }
                    }
                }
            }
        }
        // stage 0 from the (possibly off-grid) initial state
        double best = kInf, best_p = 0.0;
        int best_j = -1, best_s2 = -1;
        for (int j = 0; j < G; ++j) {
            double p = 0.0;
            if (root_idx) {
                p = power[static_cast<std::size_t>(*root_idx) * G + j];
                if (std::isnan(p)) continue;
            } else {
                p = power_for_transition(e_root, grid[j], b);
                if (!lat.power_ok(p, b)) continue;
            }
            const double trade = stage_trade(0, p);
            const double* wrow = &W[GG + static_cast<std::size_t>(j) * G];
            for (int s2 = 0; s2 < G; ++s2) {
                const double wv = wrow[s2];
                if (!std::isfinite(wv)) continue;
                const double sigma = update_extreme(e_root, grid[j], grid[s2]);
                const double c = n * root_loss(grid[j], sigma) + trade + wv;
                if (best_j < 0 || detail::better(c, p, best, best_p)) {
                    best = c;
                    best_p = p;
                    best_j = j;
                    best_s2 = s2;
                }
            }
        }
        if (best_j < 0) throw InfeasibleError("solve_horizon: no feasible action from the initial state");

        // summary table: minimum over extremes per (stage, state)
        for (int k = 1; k < N; ++k)
            for (int i = 0; i < G; ++i) {
                double bv = kInf, bp = 0.0;
                int bs = -1;
                for (int s = 0; s < G; ++s) {
                    const std::size_t at = static_cast<std::size_t>(k) * GG + static_cast<std::size_t>(i) * G + s;
                    if (next_j[at] < 0) continue;
                    if (bs < 0 || detail::better(W[at], next_p[at], bv, bp)) {
                        bv = W[at];
                        bp = next_p[at];
                        bs = s;
                    }
                }
                if (bs >= 0) {
                    tab.value[static_cast<std::size_t>(k) * G + i] = bv;
                    tab.sigma[static_cast<std::size_t>(k) * G + i] = grid[static_cast<std::size_t>(bs)];
                    tab.best_action[static_cast<std::size_t>(k) * G + i] = bp;
                }
            }
        if (root_idx) {
            tab.value[static_cast<std::size_t>(*root_idx)] = best;
            tab.sigma[static_cast<std::size_t>(*root_idx)] = update_extreme(e_root, grid[best_j], grid[best_s2]);
            tab.best_action[static_cast<std::size_t>(*root_idx)] = best_p;
        }

        sol.objective = best;
        sol.energies.push_back(e0);
        sol.actions.push_back(best_p);
        int j = best_j, s2 = best_s2;
        for (int k = 1; k < N; ++k) {
            sol.energies.push_back(grid[static_cast<std::size_t>(j)]);
            const std::size_t slot = static_cast<std::size_t>(k) * GG + static_cast<std::size_t>(j) * G + s2;
            const int jn = next_j[slot], sn = next_s[slot];
            sol.actions.push_back(next_p[slot]);
            j = jn;
            s2 = sn;
        }
        sol.energies.push_back(grid[static_cast<std::size_t>(j)]);
        return sol;
    }

    // single extreme per state
    std::vector<int> succ(static_cast<std::size_t>(N) * G, -1);
    for (int k = N - 1; k >= 1; --k)
        for (int i = 0; i < G; ++i) {
            double bv = kInf, bp = 0.0, bs = 0.0;
            int bj = -1;
            for (int j = 0; j < G; ++j) {
                const double p = power[static_cast<std::size_t>(i) * G + j];
                if (std::isnan(p)) continue;
                const double vn = tab.v(k + 1, j);
                if (!std::isfinite(vn)) continue;
                const double sigma = update_extreme(grid[i], grid[j], tab.s(k + 1, j));
                const double c = n * incremental_loss_cost(grid[i], grid[j], sigma, sc.cycle, b.e_max) + stage_trade(k, p) + vn;
                if (bj < 0 || detail::better(c, p, bv, bp)) {
                    bv = c;
                    bp = p;
                    bs = sigma;
                    bj = j;
                }
            }
            if (bj < 0) continue;
            const std::size_t at = static_cast<std::size_t>(k) * G + i;
            tab.value[at] = bv;
            tab.sigma[at] = bs;
            tab.best_action[at] = bp;
            succ[at] = bj;
        }
    double best = kInf, best_p = 0.0, best_sigma = 0.0;
    int best_j = -1;
    for (int j = 0; j < G; ++j) {
        const double p = power_for_transition(e_root, grid[j], b);
        if (!lat.power_ok(p, b)) continue;
        const double vn = tab.v(1, j);
        if (!std::isfinite(vn)) continue;
        const double sigma = update_extreme(e_root, grid[j], tab.s(1, j));
        const double c = n * root_loss(grid[j], sigma) + stage_trade(0, p) + vn;
        if (best_j < 0 || detail::better(c, p, best, best_p)) {
            best = c;
            best_p = p;
            best_sigma = sigma;
            best_j = j;
        }
    }
    if (best_j < 0) throw InfeasibleError("solve_horizon: no feasible action from the initial state");
    if (root_idx) {
        tab.value[static_cast<std::size_t>(*root_idx)] = best;
        tab.sigma[static_cast<std::size_t>(*root_idx)] = best_sigma;
        tab.best_action[static_cast<std::size_t>(*root_idx)] = best_p;
    }
    sol.objective = best;
    sol.energies.push_back(e0);
    sol.actions.push_back(best_p);
    int j = best_j;
    for (int k = 1; k < N; ++k) {
        sol.energies.push_back(grid[static_cast<std::size_t>(j)]);
        const std::size_t at = static_cast<std::size_t>(k) * G + j;
        sol.actions.push_back(tab.best_action[at]);
        j = succ[at];
    }
    sol.energies.push_back(grid[static_cast<std::size_t>(j)]);
    return sol;
}

/// Objective of an explicit state path priced offline: half cycles from the
/// counter plus market cost. Used to cross-check the recursion.
inline double evaluate_path(const DispatchScenario& sc, const std::vector<double>& energies, std::size_t k0)
{
    const BatterySpec& b = sc.battery;
    double cost = sc.battery.n_parallel * trajectory_cycle_cost(energies, b.e_max, sc.cycle);
    for (std::size_t k = 0; k + 1 < energies.size(); ++k) {
        const double p = power_for_transition(energies[k], energies[k + 1], b);
        const std::size_t t = k0 + k;
        cost += trading_cost(sc.price[t], grid_exchange(sc.renewable[t], sc.load[t], p, b.n_parallel));
    }
    return cost;
}

struct DispatchEvaluation {
    double bess_cost = 0.0;
    double trading_cost = 0.0;
    double overall_cost = 0.0;
    double baseline_cost = 0.0;

    double improvement_percent() const
    {
        if (baseline_cost == 0.0) return 0.0;
        return 100.0 * (baseline_cost - overall_cost) / std::abs(baseline_cost);
    }
};

struct DispatchRunReport {
    std::vector<double> trajectory;  ///< total_steps + 1 states
    std::vector<double> executed_actions;
    std::vector<double> p_grid;      ///< actual-data exchange per step
    std::vector<double> step_cost;   ///< actual-data trading cost per step
    std::vector<double> half_cycles;
    DispatchEvaluation actual;       ///< assessed with the true series
    DispatchEvaluation planning;     ///< assessed with the forecasts used for planning
};

inline DispatchEvaluation evaluate_run(const DispatchScenario& data, const std::vector<double>& trajectory, const std::vector<double>& actions,
                                       std::size_t k0)
{
    DispatchEvaluation ev;
    const BatterySpec& b = data.battery;
    ev.bess_cost = b.n_parallel * trajectory_cycle_cost(trajectory, b.e_max, data.cycle);
    for (std::size_t k = 0; k < actions.size(); ++k) {
        const std::size_t t = k0 + k;
        ev.trading_cost += trading_cost(data.price[t], grid_exchange(data.renewable[t], data.load[t], actions[k], b.n_parallel));
        ev.baseline_cost += trading_cost(data.price[t], data.renewable[t] - data.load[t]);
    }
    ev.overall_cost = ev.bess_cost + ev.trading_cost;
    return ev;
}

/// Forecast copies of the three series, each perturbed with its own stream.
inline DispatchScenario perturbed_scenario(const DispatchScenario& sc, const ForecastErrorSpec& err)
{
    DispatchScenario plan = sc;
    plan.renewable = inject_forecast_error(sc.renewable, {err.sigma_fraction, derive_seed(err.seed, 0)});
    plan.load = inject_forecast_error(sc.load, {err.sigma_fraction, derive_seed(err.seed, 1)});
    plan.price = inject_forecast_error(sc.price, {err.sigma_fraction, derive_seed(err.seed, 2)});
    return plan;
}

/// Receding horizon: plan on forecasts over [k, k+N), apply the first action,
/// repeat. The battery transition is deterministic, so the actual trajectory
/// equals the planned first steps.
/// Start of the trajectory's last monotone run; flat steps extend it.
inline std::optional<double> run_start(const std::vector<double>& trajectory)
{
    int dir = 0;
    std::size_t k = trajectory.size();
    while (k > 1) {
        const int d = direction(trajectory[k - 2], trajectory[k - 1]);
        if (d != 0) {
            if (dir != 0 && d != dir) break;
            dir = d;
        }
        --k;
    }
    if (dir == 0) return std::nullopt;
    return trajectory[k - 1];
}

inline DispatchRunReport receding_horizon_run(const DispatchScenario& sc, double e0, std::size_t total_steps, const ForecastErrorSpec& err,
                                              ExtremeMode mode = ExtremeMode::exact)
{
    sc.validate();
    if (total_steps + static_cast<std::size_t>(sc.horizon_steps) > sc.data_length())
        throw std::out_of_range("receding_horizon_run: total_steps + horizon exceeds data length");
    const DispatchScenario plan = perturbed_scenario(sc, err);
    DispatchRunReport rep;
    rep.trajectory.push_back(e0);
    double e = e0;
    for (std::size_t k = 0; k < total_steps; ++k) {
        const HorizonSolution s = solve_horizon(plan, e, k, mode, run_start(rep.trajectory));
        const double p = s.actions.front();
        e = s.energies[1];
        rep.executed_actions.push_back(p);
        rep.trajectory.push_back(e);
        const double pg = grid_exchange(sc.renewable[k], sc.load[k], p, sc.battery.n_parallel);
        rep.p_grid.push_back(pg);
        rep.step_cost.push_back(trading_cost(sc.price[k], pg));
    }
    rep.half_cycles = count_half_cycles(rep.trajectory, sc.battery.e_max);
    rep.actual = evaluate_run(sc, rep.trajectory, rep.executed_actions, 0);
    rep.planning = evaluate_run(plan, rep.trajectory, rep.executed_actions, 0);
    return rep;
}

}  // namespace mgopt
