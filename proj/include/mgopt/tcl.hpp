#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgopt/timeseries.hpp"

namespace mgopt {

/// One homogeneous class of thermostatically controlled loads (cooling).
/// Temperatures in degC, time in hours, power in kW, beta in degC per kW.
struct TclParams {
    double alpha = 0.5;  ///< 1/h
    double beta = 300.0;
    double p_rated = 0.1;
    int n_units = 3200;
    double band_low = 20.0;
    double band_high = 23.0;
    int switch_delay_steps = 0;  ///< actuation delay in simulation sub-steps

    std::vector<std::string> diagnostics() const
    {
        std::vector<std::string> out;
        if (!(alpha > 0.0 && beta > 0.0 && p_rated > 0.0)) out.push_back("tcl: alpha, beta and p_rated must be positive");
        if (!(band_low < band_high)) out.push_back("tcl: need band_low < band_high");
        if (n_units < 1) out.push_back("tcl: n_units must be >= 1");
        if (switch_delay_steps < 0) out.push_back("tcl: switch_delay_steps must be >= 0");
        return out;
    }

    void validate() const
    {
        const auto d = diagnostics();
        if (!d.empty()) throw std::invalid_argument(d.front());
    }

    /// kW drawn per degC of (t_out - setpoint) at sliding-mode equilibrium.
    double demand_gain() const { return n_units / beta; }
};

/// Aggregate power n*(t_out - setpoint)/beta held by the switching rule.
inline double aggregate_demand(double t_out, double setpoint, const TclParams& p)
{
    if (t_out < setpoint) throw std::domain_error("aggregate_demand: outdoor temperature below setpoint");
    return p.demand_gain() * (t_out - setpoint);
}

inline double aggregate_demand(double t_out, double setpoint, const std::vector<TclParams>& classes)
{
    double d = 0.0;
    for (const auto& c : classes) d += aggregate_demand(t_out, setpoint, c);
    return d;
}

struct TclTrace {
    int substeps = 1;
    double dt_hours = 0.0;
    std::vector<double> temperature;  ///< stages*substeps + 1 samples
    std::vector<std::uint8_t> state;  ///< switch state applied over each sub-step
    std::vector<double> duty;         ///< mean ON fraction per stage
};

/// Forward-Euler simulation of dT/dt = alpha*(T_out - T - beta*s*P) with the
/// switching rule s = [T >= setpoint] read `switch_delay_steps` sub-steps late.
/// A forced state replaces the switching rule (open-loop runs).
inline TclTrace simulate_tcl(double t_in0, const TimeSeries& t_out, const std::vector<double>& setpoint, const TclParams& p,
                             int substeps_per_stage, std::optional<int> forced_state = std::nullopt)
{
    p.validate();
    if (t_out.empty()) throw std::invalid_argument("simulate_tcl: empty outdoor temperature series");
    if (setpoint.size() != 1 && setpoint.size() != t_out.size())
        throw std::invalid_argument("simulate_tcl: setpoint must be scalar or match the temperature series");
    if (substeps_per_stage < 1) throw std::invalid_argument("simulate_tcl: substeps_per_stage must be >= 1");
    const double dt = t_out.step_hours() / substeps_per_stage;
    if (p.alpha * dt >= 1.0) throw std::invalid_argument("simulate_tcl: sub-step too coarse, alpha*dt must be < 1");

    auto sp_at = [&](std::size_t k) { return setpoint.size() == 1 ? setpoint[0] : setpoint[k]; };

    TclTrace tr;
    tr.substeps = substeps_per_stage;
    tr.dt_hours = dt;
    const std::size_t total = t_out.size() * static_cast<std::size_t>(substeps_per_stage);
    tr.temperature.reserve(total + 1);
    tr.temperature.push_back(t_in0);
    tr.state.reserve(total);
    tr.duty.assign(t_out.size(), 0.0);
    for (std::size_t j = 0; j < total; ++j) {
        const std::size_t k = j / static_cast<std::size_t>(substeps_per_stage);
        int s = 0;
        if (forced_state) {
            s = *forced_state != 0;
        } else {
            const std::size_t lag = static_cast<std::size_t>(p.switch_delay_steps);
            const double seen = tr.temperature[j >= lag ? j - lag : 0];
            s = seen >= sp_at(k) ? 1 : 0;
        }
        const double T = tr.temperature.back();
        tr.temperature.push_back(T + dt * p.alpha * (t_out[k] - T - p.beta * s * p.p_rated));
        tr.state.push_back(static_cast<std::uint8_t>(s));
        tr.duty[k] += s;
    }
    for (double& d : tr.duty) d /= substeps_per_stage;
    return tr;
}

inline TclTrace simulate_tcl(double t_in0, const TimeSeries& t_out, double setpoint, const TclParams& p, int substeps_per_stage,
                             std::optional<int> forced_state = std::nullopt)
{
    return simulate_tcl(t_in0, t_out, std::vector<double>{setpoint}, p, substeps_per_stage, forced_state);
}

/// Bound on the excursion around the setpoint caused by the actuation delay
/// once the temperature has reached it: (delay+1) sub-steps at the fastest
/// possible drift in either direction.
inline double chattering_band(const TclParams& p, double t_out_max, double setpoint, double dt_hours)
{
    return (p.switch_delay_steps + 1) * dt_hours * p.alpha * (p.beta * p.p_rated + std::max(0.0, t_out_max - setpoint));
}

}  // namespace mgopt
