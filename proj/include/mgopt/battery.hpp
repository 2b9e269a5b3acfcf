#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgopt/common.hpp"

namespace mgopt {

/// Static ratings of one storage unit. Energy and power share a unit pair
/// (kWh with kW, or MWh with MW); delta_t converts one into the other.
struct BatterySpec {
    double e_max = 12.5;        ///< rated capacity, used to normalise depth of discharge
    double e_min = 1.25;        ///< lower state bound
    double e_cap_max = 11.25;   ///< upper state bound
    double p_charge_max = 24.0;
    double p_discharge_max = 24.0;
    double d_loss = 0.05;
    double delta_t = 1.0 / 12.0;
    int n_parallel = 1;

    std::vector<std::string> diagnostics() const
    {
        std::vector<std::string> out;
        if (!(0.0 <= e_min && e_min < e_cap_max && e_cap_max <= e_max)) out.push_back("battery: need 0 <= e_min < e_cap_max <= e_max");
        if (!(p_charge_max > 0.0 && p_discharge_max > 0.0)) out.push_back("battery: power limits must be positive");
        if (!(d_loss > 0.0 && d_loss < 1.0)) out.push_back("battery: d_loss must lie in (0, 1)");
        if (!(delta_t > 0.0)) out.push_back("battery: delta_t must be positive");
        if (n_parallel < 1) out.push_back("battery: n_parallel must be >= 1");
        return out;
    }

    void validate() const
    {
        const auto d = diagnostics();
        if (!d.empty()) throw std::invalid_argument(d.front());
    }
};

/// E' = E - P*dt - d*|P*dt|; positive P discharges.
inline double battery_next_energy(double e, double p_b, double delta_t, double d_loss)
{
    const double moved = p_b * delta_t;
    return e - moved - d_loss * std::abs(moved);
}

inline double step_battery(double e, double p_b, const BatterySpec& spec)
{
    constexpr double slack = 1e-9;
    if (p_b > spec.p_discharge_max * (1.0 + slack) || p_b < -spec.p_charge_max * (1.0 + slack))
        throw std::out_of_range("step_battery: power " + format_double(p_b) + " outside [-" + format_double(spec.p_charge_max) + ", " +
                                format_double(spec.p_discharge_max) + "]");
    return battery_next_energy(e, p_b, spec.delta_t, spec.d_loss);
}

/// Power that moves the state from e to e_next under the lossy dynamics.
inline double power_for_transition(double e, double e_next, double delta_t, double d_loss)
{
    if (e_next < e) return (e - e_next) / (delta_t * (1.0 + d_loss));
    if (e_next > e) return -(e_next - e) / (delta_t * (1.0 - d_loss));
    return 0.0;
}

inline double power_for_transition(double e, double e_next, const BatterySpec& spec)
{
    return power_for_transition(e, e_next, spec.delta_t, spec.d_loss);
}

struct CycleCostParams {
    double n_fail_100 = 2347.0;
    double kp = 1.1;
    double r_c = 2'500'000.0;

    std::vector<std::string> diagnostics() const
    {
        std::vector<std::string> out;
        if (!(n_fail_100 > 0.0)) out.push_back("cycle cost: n_fail_100 must be positive");
        if (!(kp > 0.0)) out.push_back("cycle cost: kp must be positive");
        if (!(r_c >= 0.0)) out.push_back("cycle cost: r_c must be non-negative");
        return out;
    }

    void validate() const
    {
        const auto d = diagnostics();
        if (!d.empty()) throw std::invalid_argument(d.front());
    }

    double unit_cost() const { return 0.5 * r_c / n_fail_100; }
};

/// Replacement-cost share consumed by one half cycle of the given depth.
inline double half_cycle_cost(double d_half, const CycleCostParams& p)
{
    constexpr double slack = 1e-12;
    if (!(d_half >= -slack && d_half <= 1.0 + slack)) throw std::out_of_range("half_cycle_cost: depth " + format_double(d_half) + " outside [0, 1]");
    if (d_half <= 0.0) return 0.0;
    return p.unit_cost() * std::pow(std::min(d_half, 1.0), p.kp);
}

/// Cycles to failure at depth d: N100 * d^-kp.
inline double cycles_to_failure(double d, const CycleCostParams& p)
{
    if (!(d > 0.0 && d <= 1.0)) throw std::out_of_range("cycles_to_failure: depth must lie in (0, 1]");
    return p.n_fail_100 * std::pow(d, -p.kp);
}

/// Years of service for n_day daily cycles over w operating days a year.
inline double lifetime_from_cycles(double n_fail, double w, double n_day)
{
    if (!(w > 0.0 && n_day > 0.0)) throw std::invalid_argument("lifetime_from_cycles: w and n_day must be positive");
    return n_fail / (w * n_day);
}

inline int direction(double from, double to)
{
    if (to > from) return 1;
    if (to < from) return -1;
    return 0;
}

/// Depths of the half cycles in a state trajectory. A half cycle ends where
/// the direction of movement flips; flat steps extend the current segment.
inline std::vector<double> count_half_cycles(std::span<const double> trajectory, double e_max)
{
    if (trajectory.empty()) throw std::invalid_argument("count_half_cycles: empty trajectory");
    if (!(e_max > 0.0)) throw std::invalid_argument("count_half_cycles: e_max must be positive");
    std::vector<double> dods;
    std::size_t start = 0;
    int dir = 0;
    for (std::size_t k = 1; k < trajectory.size(); ++k) {
        const int d = direction(trajectory[k - 1], trajectory[k]);
        if (d == 0) continue;
        if (dir != 0 && d != dir) {
            dods.push_back(std::abs(trajectory[k - 1] - trajectory[start]) / e_max);
            start = k - 1;
        }
        dir = d;
    }
    if (dir != 0) dods.push_back(std::abs(trajectory.back() - trajectory[start]) / e_max);
    return dods;
}

inline std::vector<double> count_half_cycles(const std::vector<double>& trajectory, double e_max)
{
    return count_half_cycles(std::span<const double>(trajectory), e_max);
}

/// Equivalent number of 100%-depth cycles: sum of 0.5 * d^kp.
inline double equivalent_full_cycles(std::span<const double> dods, double kp)
{
    double n = 0.0;
    for (double d : dods) {
        if (!(d >= 0.0 && d <= 1.0)) throw std::out_of_range("equivalent_full_cycles: depth outside [0, 1]");
        n += 0.5 * std::pow(d, kp);
    }
    return n;
}

inline double equivalent_full_cycles(const std::vector<double>& dods, double kp)
{
    return equivalent_full_cycles(std::span<const double>(dods), kp);
}

inline double trajectory_cycle_cost(std::span<const double> trajectory, double e_max, const CycleCostParams& p)
{
    double c = 0.0;
    for (double d : count_half_cycles(trajectory, e_max)) c += half_cycle_cost(d, p);
    return c;
}

/// Per-step share of the half-cycle cost given the subsequent local extreme
/// sigma. Summed along a trajectory it telescopes to the half-cycle total.
inline double incremental_loss_cost(double e_k, double e_next, double sigma, const CycleCostParams& p, double e_max)
{
    if (e_k == e_next) return 0.0;
    const double a = std::abs(e_k - sigma) / e_max;
    const double b = std::abs(e_next - sigma) / e_max;
    return p.unit_cost() * (std::pow(a, p.kp) - std::pow(b, p.kp));
}

/// Subsequent local extreme seen from e_prev, given the step e_prev -> e_next
/// and the extreme sigma_next seen from e_next.
inline double update_extreme(double e_prev, double e_next, double sigma_next)
{
    const int first = direction(e_prev, e_next);
    const int second = direction(e_next, sigma_next);
    if (first != 0 && second != 0 && first != second) return e_next;
    return sigma_next;
}

/// Extremes sigma_k for every step of a trajectory, computed backwards from the
/// terminal state.
inline std::vector<double> assign_extremes(std::span<const double> trajectory)
{
    if (trajectory.empty()) return {};
    std::vector<double> sigma(trajectory.size());
    sigma.back() = trajectory.back();
    for (std::size_t k = trajectory.size() - 1; k-- > 0;) sigma[k] = update_extreme(trajectory[k], trajectory[k + 1], sigma[k + 1]);
    return sigma;
}

/// Sum of incremental_loss_cost along a trajectory with extremes from update_extreme.
inline double recursive_cycle_cost(std::span<const double> trajectory, double e_max, const CycleCostParams& p)
{
    const auto sigma = assign_extremes(trajectory);
    double c = 0.0;
    for (std::size_t k = 0; k + 1 < trajectory.size(); ++k) c += incremental_loss_cost(trajectory[k], trajectory[k + 1], sigma[k], p, e_max);
    return c;
}

// ---------------------------------------------------------------------------
// Ah-throughput lifetime model

struct ThroughputLifeSpec {
    double l_r = 1500.0;   ///< rated cycle life
    double d_r = 1.0;      ///< rated depth of discharge
    double c_r = 936.0;    ///< rated Ah capacity
    double price = 44928.0;
    /// quartic cycle-life fit, highest power first
    std::array<double, 5> poly_coeffs{17612.0, -48325.0, 49771.0, -26417.0, 8898.0};
    /// capacity fit a1*exp(b1*I) + a2*exp(b2*I)
    std::array<double, 4> exp_coeffs{638.5, -0.03876, 975.9, -0.003531};
    double voltage = 320.0;

    std::vector<std::string> diagnostics() const
    {
        std::vector<std::string> out;
        if (!(l_r > 0.0 && c_r > 0.0 && price > 0.0)) out.push_back("throughput life: l_r, c_r and price must be positive");
        if (!(d_r > 0.0 && d_r <= 1.0)) out.push_back("throughput life: d_r must lie in (0, 1]");
        if (!(voltage > 0.0)) out.push_back("throughput life: voltage must be positive");
        return out;
    }

    void validate() const
    {
        const auto d = diagnostics();
        if (!d.empty()) throw std::invalid_argument(d.front());
    }

    double rated_throughput() const { return l_r * d_r * c_r; }
};

struct DischargeEvent {
    double dod = 0.0;
    double current = 0.0;   ///< A
    double ah = 0.0;        ///< Ah discharged
    double duration = 0.0;  ///< h
};

inline double cycle_life_at_dod(double d, const ThroughputLifeSpec& s)
{
    if (!(d > 0.0 && d <= 1.0)) throw std::out_of_range("cycle_life_at_dod: depth must lie in (0, 1]");
    double v = 0.0;
    for (double c : s.poly_coeffs) v = v * d + c;
    return v;
}

inline double capacity_at_current(double i, const ThroughputLifeSpec& s)
{
    if (!(i >= 0.0)) throw std::out_of_range("capacity_at_current: current must be non-negative");
    const auto& c = s.exp_coeffs;
    return c[0] * std::exp(c[1] * i) + c[2] * std::exp(c[3] * i);
}

/// Effective Ah of one event after the depth and rate adjustments.
inline double effective_throughput(const DischargeEvent& ev, const ThroughputLifeSpec& s)
{
    if (ev.ah < 0.0 || ev.current < 0.0 || ev.duration < 0.0 || ev.dod < 0.0 || ev.dod > 1.0 + 1e-12)
        throw std::out_of_range("discharge event fields out of range");
    if (ev.ah == 0.0) return 0.0;
    const double la = cycle_life_at_dod(std::min(ev.dod, 1.0), s);
    const double ca = capacity_at_current(ev.current, s);
    if (!(la > 0.0)) throw std::domain_error("cycle-life fit is non-positive at depth " + format_double(ev.dod));
    if (!(ca > 0.0)) throw std::domain_error("capacity fit is non-positive at current " + format_double(ev.current));
    return (s.l_r / la) * (s.c_r / ca) * ev.ah;
}

inline double effective_throughput(std::span<const DischargeEvent> events, const ThroughputLifeSpec& s)
{
    double sum = 0.0;
    for (const auto& ev : events) sum += effective_throughput(ev, s);
    return sum;
}

/// Lifetime over which `events`, repeating every period_hours, exhaust the
/// rated throughput. +inf when nothing is discharged.
inline double lifetime_hours(std::span<const DischargeEvent> events, const ThroughputLifeSpec& s, double period_hours)
{
    if (!(period_hours > 0.0)) throw std::invalid_argument("lifetime_hours: period must be positive");
    const double eff = effective_throughput(events, s);
    if (eff <= 0.0) return kInf;
    return s.rated_throughput() / eff * period_hours;
}

inline double throughput_operational_cost(std::span<const DischargeEvent> events, const ThroughputLifeSpec& s)
{
    return s.price * effective_throughput(events, s) / s.rated_throughput();
}

inline double throughput_operational_cost(const DischargeEvent& ev, const ThroughputLifeSpec& s)
{
    return s.price * effective_throughput(ev, s) / s.rated_throughput();
}

}  // namespace mgopt
