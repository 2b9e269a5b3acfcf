#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mgopt/battery.hpp"
#include "mgopt/common.hpp"
#include "mgopt/timeseries.hpp"

namespace mgopt {

/// Wind-farm storage dispatch. Energies are Wh, prices per MWh, so income
/// is price * Wh * 1e-6.
struct AdpDispatchConfig {
    ThroughputLifeSpec life;
    double lb = 89856.0;
    double ub = 269568.0;
    double r_d = 8486.0;
    double r_c = 4992.0;
    double state_step = 1248.0;  ///< Wh between lattice states; actions are multiples of it
    int horizon = 6;
    int long_price_window = 240;  ///< steps averaged for the remaining-energy price (20 h of 5 min)
    double stepsize_eps = 10.0;
    double stepsize_beta = 0.6;
    int max_iterations = 200;
    double sample_sigma_fraction = 0.0;  ///< noise on sampled training paths
    double step_hours = 1.0 / 12.0;
    double x0 = 269568.0;

    std::vector<std::string> diagnostics() const
    {
        std::vector<std::string> out;
        for (auto& d : life.diagnostics()) out.push_back(d);
        if (!(lb < ub)) out.push_back("adp: need lb < ub");
        if (!(r_d > 0.0 && r_c > 0.0)) out.push_back("adp: r_d and r_c must be positive");
        if (!(state_step > 0.0)) out.push_back("adp: state_step must be positive");
        const double cells = (ub - lb) / state_step;
        if (std::abs(cells - std::round(cells)) > 1e-6) out.push_back("adp: (ub - lb) must be a multiple of state_step");
        if (horizon < 1) out.push_back("adp: horizon must be >= 1");
        if (long_price_window < 1) out.push_back("adp: long_price_window must be >= 1");
        if (max_iterations < 1) out.push_back("adp: max_iterations must be >= 1");
        if (!(step_hours > 0.0)) out.push_back("adp: step_hours must be positive");
        if (sample_sigma_fraction < 0.0) out.push_back("adp: sample_sigma_fraction must be non-negative");
        if (x0 < lb - 1e-6 || x0 > ub + 1e-6) out.push_back("adp: x0 outside [lb, ub]");
        return out;
    }

    void validate() const
    {
        const auto d = diagnostics();
        if (!d.empty()) throw std::invalid_argument(d.front());
    }

    double energy_capacity() const { return life.voltage * life.c_r; }
    int states() const { return static_cast<int>(std::lround((ub - lb) / state_step)) + 1; }
    int max_discharge_steps() const { return static_cast<int>(std::floor(r_d / state_step + 1e-9)); }
    int max_charge_steps() const { return static_cast<int>(std::floor(r_c / state_step + 1e-9)); }
    double state(int i) const { return lb + state_step * i; }

    int index_of(double x) const
    {
        const double r = (x - lb) / state_step;
        const long i = std::lround(r);
        if (std::abs(r - static_cast<double>(i)) > 1e-6 || i < 0 || i >= states())
            throw std::invalid_argument("adp: state " + format_double(x) + " is not on the lattice");
        return static_cast<int>(i);
    }
};

/// Forecast data for one horizon: wind energy per step (Wh), price per step,
/// and the long-run average price that values leftover energy.
struct AdpHorizon {
    std::vector<double> wind_wh;
    std::vector<double> price;
    double m_rm = 0.0;

    int length() const { return static_cast<int>(price.size()); }
};

inline double wind_energy_wh(double power_kw, double step_hours) { return power_kw * step_hours * 1000.0; }

/// Mean price over [k0, k0 + window), truncated at the end of the data.
inline double long_run_price(const TimeSeries& price, std::size_t k0, int window)
{
    if (k0 >= price.size()) throw std::out_of_range("long_run_price: start beyond data");
    const std::size_t end = std::min(price.size(), k0 + static_cast<std::size_t>(window));
    double s = 0.0;
    for (std::size_t t = k0; t < end; ++t) s += price[t];
    return s / static_cast<double>(end - k0);
}

inline AdpHorizon make_horizon(const TimeSeries& wind, const TimeSeries& price, std::size_t k0, const AdpDispatchConfig& cfg)
{
    const std::size_t N = static_cast<std::size_t>(cfg.horizon);
    if (k0 + N > wind.size() || k0 + N > price.size()) throw std::out_of_range("make_horizon: horizon exceeds data");
    AdpHorizon hz;
    for (std::size_t t = k0; t < k0 + N; ++t) {
        hz.wind_wh.push_back(wind_energy_wh(wind[t], cfg.step_hours));
        hz.price.push_back(price[t]);
    }
    hz.m_rm = long_run_price(price, k0, cfg.long_price_window);
    return hz;
}

/// Discharge of -u Wh (u < 0) from state x over one step.
inline DischargeEvent discharge_event(double x, double u, const AdpDispatchConfig& cfg)
{
    if (u >= 0.0) return {};
    const double wh = -u;
    DischargeEvent ev;
    ev.ah = wh / cfg.life.voltage;
    ev.current = wh / cfg.step_hours / cfg.life.voltage;
    ev.dod = std::clamp(1.0 - (x + u) / cfg.energy_capacity(), 0.0, 1.0);
    ev.duration = cfg.step_hours;
    return ev;
}

/// Throughput cost of an action; charging is free.
inline double operational_cost(double x, double u, const AdpDispatchConfig& cfg)
{
    if (u >= 0.0) return 0.0;
    return throughput_operational_cost(discharge_event(x, u, cfg), cfg.life);
}

/// Cost of draining the remainder above lb at the 20-hour rate.
inline double remaining_energy_cost(double x_end, const AdpDispatchConfig& cfg)
{
    const double wh = x_end - cfg.lb;
    if (wh <= 0.0) return 0.0;
    DischargeEvent ev;
    ev.ah = wh / cfg.life.voltage;
    ev.current = cfg.life.c_r / 20.0;
    ev.dod = std::clamp(1.0 - cfg.lb / cfg.energy_capacity(), 0.0, 1.0);
    ev.duration = 20.0;
    return throughput_operational_cost(ev, cfg.life);
}

/// Value of the energy left after the last action: m_rm*(x+u-LB) - C_rm.
inline double remaining_energy_value(double x_last, double u_last, double m_rm, const AdpDispatchConfig& cfg)
{
    const double x_end = x_last + u_last;
    if (x_end < cfg.lb - 1e-6 || x_end > cfg.ub + 1e-6) throw std::out_of_range("remaining_energy_value: final state outside [lb, ub]");
    return m_rm * (x_end - cfg.lb) * 1e-6 - remaining_energy_cost(x_end, cfg);
}

/// Stage reward m*(p - u) - C_opr.
inline double stage_reward(double x, double u, double wind_wh, double price, const AdpDispatchConfig& cfg)
{
    return price * (wind_wh - u) * 1e-6 - operational_cost(x, u, cfg);
}

/// Extra income of discharging, -u*m - C_opr.
inline double discharge_income(double x, double u, double price, const AdpDispatchConfig& cfg)
{
    return -u * price * 1e-6 - operational_cost(x, u, cfg);
}

/// Largest-income discharge on the lattice; 0 unless the income is strictly positive.
inline double bound_action(double x, double m, const AdpDispatchConfig& cfg)
{
    const double h = cfg.state_step;
    const int room = static_cast<int>(std::floor((x - cfg.lb) / h + 1e-9));
    const int steps = std::min(cfg.max_discharge_steps(), std::max(room, 0));
    double best_u = 0.0, best = 0.0;
    for (int s = 1; s <= steps; ++s) {
        const double u = -h * s;
        const double v = discharge_income(x, u, m, cfg);
        if (v > best && !nearly_equal(v, best)) {
            best = v;
            best_u = u;
        }
    }
    return best_u;
}

/// Admissible action steps at (x, wind).
struct ActionRange {
    int lo = 0;
    int hi = 0;
};

inline ActionRange action_range(int xi, double wind_wh, const AdpDispatchConfig& cfg)
{
    const int n = cfg.states();
    ActionRange r;
    r.lo = -std::min(cfg.max_discharge_steps(), xi);
    const int wind_steps = static_cast<int>(std::floor(std::max(wind_wh, 0.0) / cfg.state_step + 1e-9));
    r.hi = std::min({cfg.max_charge_steps(), n - 1 - xi, wind_steps});
    return r;
}

struct ValueTable {
    int stages = 0;
    int states = 0;
    std::vector<double> value;          ///< stages x states
    std::vector<std::uint8_t> initialized;
    std::vector<int> visits;

    std::size_t at(int k, int i) const { return static_cast<std::size_t>(k) * states + static_cast<std::size_t>(i); }
};

struct AdpPlan {
    std::vector<double> actions;
    std::vector<double> states;  ///< horizon + 1
    double objective = 0.0;      ///< stage rewards plus remaining-energy value
};

/// Forward approximate value iteration over one horizon.
class AdpSolver {
public:
    AdpSolver(AdpDispatchConfig cfg, AdpHorizon hz) : cfg_(std::move(cfg)), hz_(std::move(hz))
    {
        cfg_.validate();
        if (hz_.length() != cfg_.horizon || static_cast<int>(hz_.wind_wh.size()) != cfg_.horizon)
            throw std::invalid_argument("AdpSolver: horizon data length differs from configured horizon");
        table_.stages = cfg_.horizon;
        table_.states = cfg_.states();
        const std::size_t cells = static_cast<std::size_t>(table_.stages) * table_.states;
        table_.value.assign(cells, 0.0);
        table_.initialized.assign(cells, 0);
        table_.visits.assign(cells, 0);
    }

    const ValueTable& table() const { return table_; }
    const AdpDispatchConfig& config() const { return cfg_; }
    const AdpHorizon& horizon() const { return hz_; }

    double terminal(int xi) const { return remaining_energy_value(cfg_.state(xi), 0.0, hz_.m_rm, cfg_); }

    /// Value of following the discharge bound policy from (k, x) on the point forecast.
    double rollout_value(int k, int xi) const
    {
        double v = 0.0;
        int i = xi;
        for (int t = k; t < cfg_.horizon; ++t) {
            const double x = cfg_.state(i);
            const double u = bound_action(x, hz_.price[static_cast<std::size_t>(t)], cfg_);
            v += stage_reward(x, u, hz_.wind_wh[static_cast<std::size_t>(t)], hz_.price[static_cast<std::size_t>(t)], cfg_);
            i += static_cast<int>(std::lround(u / cfg_.state_step));
        }
        return v + terminal(i);
    }

    /// Current estimate of J_k(x); lazily seeded with the rollout value.
    double estimate(int k, int xi)
    {
        if (k >= cfg_.horizon) return terminal(xi);
        const std::size_t a = table_.at(k, xi);
        if (!table_.initialized[a]) {
            table_.value[a] = rollout_value(k, xi);
            table_.initialized[a] = 1;
        }
        return table_.value[a];
    }

    struct Decision {
        int steps = 0;
        double value = -kInf;
    };

    /// argmax over u in [u_b, hi] of m(p - u) - C_opr + J(k+1, x+u).
    Decision decide(int k, int xi, double wind_wh, double price, bool bounded = true)
    {
        const ActionRange r = action_range(xi, wind_wh, cfg_);
        int lo = r.lo;
        if (bounded) lo = std::max(lo, static_cast<int>(std::lround(bound_action(cfg_.state(xi), price, cfg_) / cfg_.state_step)));
        Decision best;
        bool have = false;
        for (int s = lo; s <= r.hi; ++s) {
            const double x = cfg_.state(xi);
            const double u = cfg_.state_step * s;
            const double v = stage_reward(x, u, wind_wh, price, cfg_) + estimate(k + 1, xi + s);
            if (!have || v > best.value + 1e-12 * std::max(1.0, std::abs(v)) ||
                (nearly_equal(v, best.value) && std::abs(s) < std::abs(best.steps))) {
                best.steps = s;
                best.value = v;
                have = true;
            }
        }
        if (!have) throw InfeasibleError("adp: empty action set");
        return best;
    }

    /// Blend an observation into J_k(x) with stepsize a.
    void smooth(int k, int xi, double observation, double a)
    {
        const double old = estimate(k, xi);
        const std::size_t at = table_.at(k, xi);
        table_.value[at] = (1.0 - a) * old + a * observation;
        ++table_.visits[at];
    }

    /// One forward pass on the given sample path.
    void iterate(int n, const std::vector<double>& wind_wh, const std::vector<double>& price, int x0i)
    {
        const double a = harmonic_stepsize(n, cfg_.stepsize_eps, cfg_.stepsize_beta);
        int xi = x0i;
        for (int k = 0; k < cfg_.horizon; ++k) {
            const Decision d = decide(k, xi, wind_wh[static_cast<std::size_t>(k)], price[static_cast<std::size_t>(k)]);
            smooth(k, xi, d.value, a);
            xi += d.steps;
        }
    }

    void train(int iterations, std::uint64_t seed, int x0i)
    {
        const bool noisy = cfg_.sample_sigma_fraction > 0.0;
        TimeSeries w{0, cfg_.step_hours * 60.0, hz_.wind_wh, Unit::kWh};
        TimeSeries m{0, cfg_.step_hours * 60.0, hz_.price, Unit::currency_per_MWh};
        for (int n = 1; n <= iterations; ++n) {
            if (!noisy) {
                iterate(n, hz_.wind_wh, hz_.price, x0i);
                continue;
            }
            const auto ws = inject_forecast_error(w, {cfg_.sample_sigma_fraction, derive_seed(seed, 2 * static_cast<std::uint64_t>(n))});
            const auto ms = inject_forecast_error(m, {cfg_.sample_sigma_fraction, derive_seed(seed, 2 * static_cast<std::uint64_t>(n) + 1)});
            iterate(n, ws.values, ms.values, x0i);
        }
    }

    /// Greedy policy on the point forecast using the current estimates.
    AdpPlan greedy(int x0i)
    {
        AdpPlan plan;
        int xi = x0i;
        plan.states.push_back(cfg_.state(xi));
        for (int k = 0; k < cfg_.horizon; ++k) {
            const double p = hz_.wind_wh[static_cast<std::size_t>(k)], m = hz_.price[static_cast<std::size_t>(k)];
            const Decision d = decide(k, xi, p, m);
            const double u = cfg_.state_step * d.steps;
            plan.objective += stage_reward(cfg_.state(xi), u, p, m, cfg_);
            plan.actions.push_back(u);
            xi += d.steps;
            plan.states.push_back(cfg_.state(xi));
        }
        plan.objective += terminal(xi);
        return plan;
    }

private:
    AdpDispatchConfig cfg_;
    AdpHorizon hz_;
    ValueTable table_;
};

/// Trains on the first horizon of the given series starting from cfg.x0.
inline ValueTable adp_train(const TimeSeries& wind, const TimeSeries& price, const AdpDispatchConfig& cfg, std::uint64_t seed)
{
    AdpSolver solver(cfg, make_horizon(wind, price, 0, cfg));
    solver.train(cfg.max_iterations, seed, cfg.index_of(cfg.x0));
    return solver.table();
}

/// Objective of an action sequence on a horizon (rewards plus terminal value).
inline double evaluate_plan(const AdpHorizon& hz, const std::vector<double>& actions, double x0, const AdpDispatchConfig& cfg)
{
    double x = x0, v = 0.0;
    for (std::size_t k = 0; k < actions.size(); ++k) {
        v += stage_reward(x, actions[k], hz.wind_wh[k], hz.price[k], cfg);
        x += actions[k];
    }
    return v + remaining_energy_value(x, 0.0, hz.m_rm, cfg);
}

struct AdpRunReport {
    std::vector<double> states;   ///< total_steps + 1, Wh
    std::vector<double> actions;  ///< u per step, Wh
    std::vector<double> grid_wh;  ///< g = p - u
    std::vector<double> price;
    std::vector<double> m_rm;
    std::vector<double> step_income;
    std::vector<double> step_opr;
    std::vector<DischargeEvent> events;
    double income = 0.0;             ///< sum m*g
    double throughput_cost = 0.0;    ///< sum C_opr
    double additional_income = 0.0;  ///< sum(-u*m) - C_opr
    double lifetime_hours = kInf;
    double baseline_additional_income = 0.0;  ///< full-cycling comparison policy
    double baseline_income = 0.0;
    double baseline_throughput_cost = 0.0;
    std::vector<double> baseline_states;
};

/// Charge at the maximum rate until ub, then discharge at the maximum rate
/// until lb, and repeat. Charging is limited by the wind available.
inline std::vector<double> cycling_policy(const std::vector<double>& wind_wh, const AdpDispatchConfig& cfg)
{
    std::vector<double> u;
    int xi = cfg.index_of(cfg.x0);
    bool charging = xi < cfg.states() - 1;
    for (double p : wind_wh) {
        const ActionRange r = action_range(xi, p, cfg);
        int s = charging ? r.hi : r.lo;
        u.push_back(cfg.state_step * s);
        xi += s;
        if (charging && xi == cfg.states() - 1) charging = false;
        else if (!charging && xi == 0) charging = true;
    }
    return u;
}

namespace detail {

struct AdpLedger {
    double income = 0.0, opr = 0.0, additional = 0.0;
    std::vector<DischargeEvent> events;
};

inline AdpLedger settle(const std::vector<double>& wind_wh, const std::vector<double>& price, const std::vector<double>& u, double x0,
                        const AdpDispatchConfig& cfg, std::vector<double>* states = nullptr)
{
    AdpLedger l;
    double x = x0;
    if (states) states->push_back(x);
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double c = operational_cost(x, u[k], cfg);
        if (u[k] < 0.0) l.events.push_back(discharge_event(x, u[k], cfg));
        l.income += price[k] * (wind_wh[k] - u[k]) * 1e-6;
        l.opr += c;
        l.additional += -u[k] * price[k] * 1e-6 - c;
        x += u[k];
        if (states) states->push_back(x);
    }
    return l;
}

}  // namespace detail

/// Rolling execution: at each step train on the forecast horizon from the
/// current state, apply the first greedy action (charge clipped to the
/// actual wind), and settle with actual data.
inline AdpRunReport adp_dispatch_run(const TimeSeries& wind, const TimeSeries& price, const AdpDispatchConfig& cfg,
                                     const ForecastErrorSpec& err, std::size_t total_steps)
{
    cfg.validate();
    if (total_steps + static_cast<std::size_t>(cfg.horizon) > std::min(wind.size(), price.size()))
        throw std::out_of_range("adp_dispatch_run: total_steps + horizon exceeds data length");
    const TimeSeries wind_fc = inject_forecast_error(wind, {err.sigma_fraction, derive_seed(err.seed, 0)});
    const TimeSeries price_fc = inject_forecast_error(price, {err.sigma_fraction, derive_seed(err.seed, 1)});

    AdpRunReport rep;
    std::vector<double> actual_wind, actual_price;
    int xi = cfg.index_of(cfg.x0);
    for (std::size_t k = 0; k < total_steps; ++k) {
        AdpSolver solver(cfg, make_horizon(wind_fc, price_fc, k, cfg));
        solver.train(cfg.max_iterations, derive_seed(err.seed, 1000 + k), xi);
        const AdpPlan plan = solver.greedy(xi);
        const double p = wind_energy_wh(wind[k], cfg.step_hours);
        const ActionRange r = action_range(xi, p, cfg);
        const int s = std::clamp(static_cast<int>(std::lround(plan.actions.front() / cfg.state_step)), r.lo, r.hi);
        rep.actions.push_back(cfg.state_step * s);
        rep.m_rm.push_back(solver.horizon().m_rm);
        actual_wind.push_back(p);
        actual_price.push_back(price[k]);
        xi += s;
    }
    const auto led = detail::settle(actual_wind, actual_price, rep.actions, cfg.x0, cfg, &rep.states);
    rep.price = actual_price;
    double x = cfg.x0;
    for (std::size_t k = 0; k < rep.actions.size(); ++k) {
        rep.grid_wh.push_back(actual_wind[k] - rep.actions[k]);
        rep.step_income.push_back(actual_price[k] * (actual_wind[k] - rep.actions[k]) * 1e-6);
        rep.step_opr.push_back(operational_cost(x, rep.actions[k], cfg));
        x += rep.actions[k];
    }
    rep.events = led.events;
    rep.income = led.income;
    rep.throughput_cost = led.opr;
    rep.additional_income = led.additional;
    rep.lifetime_hours = lifetime_hours(rep.events, cfg.life, static_cast<double>(total_steps) * cfg.step_hours);

    const auto base_u = cycling_policy(actual_wind, cfg);
    const auto base = detail::settle(actual_wind, actual_price, base_u, cfg.x0, cfg, &rep.baseline_states);
    rep.baseline_additional_income = base.additional;
    rep.baseline_income = base.income;
    rep.baseline_throughput_cost = base.opr;
    return rep;
}

}  // namespace mgopt
