#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgopt/adp_dispatch.hpp"
#include "mgopt/dg_scheduler.hpp"
#include "mgopt/dp_dispatch.hpp"
#include "mgopt/network_adp.hpp"
#include "mgopt/smoothing.hpp"
#include "mgopt/tcl.hpp"
#include "mgopt/timeseries.hpp"

namespace mgopt {

/// Unreadable or unparseable configuration file.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Strategy { dp_dispatch, adp_dispatch, tcl_schedule, wind_smooth, network_adp };

inline std::string to_string(Strategy s)
{
    switch (s) {
    case Strategy::dp_dispatch: return "dp-dispatch";
    case Strategy::adp_dispatch: return "adp-dispatch";
    case Strategy::tcl_schedule: return "tcl-schedule";
    case Strategy::wind_smooth: return "wind-smooth";
    case Strategy::network_adp: return "network-adp";
    }
    return "?";
}

inline std::optional<Strategy> parse_strategy(const std::string& s)
{
    for (Strategy v : {Strategy::dp_dispatch, Strategy::adp_dispatch, Strategy::tcl_schedule, Strategy::wind_smooth, Strategy::network_adp})
        if (to_string(v) == s) return v;
    return std::nullopt;
}

/// A series either read from a file or synthesised on the fly.
struct SeriesSource {
    std::string name;
    Unit unit = Unit::kW;
    std::optional<std::string> path;  ///< resolved against the config directory
    ScenarioKind kind = ScenarioKind::wind;
    std::int64_t length = 0;
    std::uint64_t seed = 0;
    SynthesisParams synth;
};

struct NetworkMicrogridData {
    SeriesSource renewable;
    SeriesSource load;
};

struct ScenarioConfig {
    Strategy strategy = Strategy::dp_dispatch;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    std::size_t steps = 0;
    double forecast_sigma = 0.0;
    std::map<std::string, SeriesSource> series;

    // dp-dispatch
    BatterySpec battery;
    CycleCostParams cycle;
    int dp_horizon = 24;
    int dp_grid = 41;
    double dp_e0 = 0.0;
    ExtremeMode extreme_mode = ExtremeMode::exact;

    // adp-dispatch
    AdpDispatchConfig adp;

    // tcl-schedule
    SchedulerParams scheduler;
    TclParams tcl;
    double sched_x0 = 120.0;
    int sched_horizon = 6;
    SchedulerPolicy sched_policy = SchedulerPolicy::dynamic_programming;

    // wind-smooth, kW and kWh: 240 MWh held between 30% and 70%, 30 MW rate
    SmoothingParams smoothing;
    BatterySpec smooth_bess{240000.0, 72000.0, 168000.0, 30000.0, 30000.0, 0.05, 1.0 / 6.0, 1};
    TclParams smooth_tcl{0.5, 0.3, 0.1, 320, 20.0, 25.0, 0};
    double smooth_e0 = 0.0;
    double smooth_pg_prev = 0.0;
    int smooth_horizon = 6;

    // network-adp
    NetworkConfig network;
    NetworkAdpParams network_adp;
    std::vector<NetworkMicrogridData> network_data;
    std::uint64_t train_seed() const { return derive_seed(seed, 7); }
    ForecastErrorSpec error_spec() const { return {forecast_sigma, derive_seed(seed, 3)}; }
};

struct ConfigLoad {
    ScenarioConfig config;
    std::vector<std::string> diagnostics;
};

namespace detail {

using nlohmann::json;

/// Reads one JSON object, recording type errors and unknown keys.
class Block {
public:
    Block(const json& j, std::string where, std::vector<std::string>& diag) : j_(j), where_(std::move(where)), diag_(diag)
    {
        if (!j_.is_object()) diag_.push_back(where_ + ": expected an object");
    }

    Block(const Block&) = delete;
    Block& operator=(const Block&) = delete;

    ~Block()
    {
        if (!j_.is_object()) return;
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) diag_.push_back(path(it.key()) + ": unknown key");
    }

    bool has(const std::string& key)
    {
        seen_.insert(key);
        return j_.is_object() && j_.contains(key);
    }

    const json& at(const std::string& key)
    {
        seen_.insert(key);
        return j_.at(key);
    }

    std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

    void num(const std::string& key, double& dst)
    {
        if (!has(key)) return;
        const json& v = j_.at(key);
        if (v.is_number()) dst = v.get<double>();
        else diag_.push_back(path(key) + ": expected a number");
    }

    template <class Int>
    void integer(const std::string& key, Int& dst)
    {
        if (!has(key)) return;
        const json& v = j_.at(key);
        if (v.is_number_integer()) {
            const auto x = v.get<std::int64_t>();
            if (x < 0 && std::is_unsigned_v<Int>) diag_.push_back(path(key) + ": must be non-negative");
            else dst = static_cast<Int>(x);
        } else {
            diag_.push_back(path(key) + ": expected an integer");
        }
    }

    void str(const std::string& key, std::string& dst)
    {
        if (!has(key)) return;
        const json& v = j_.at(key);
        if (v.is_string()) dst = v.get<std::string>();
        else diag_.push_back(path(key) + ": expected a string");
    }

    std::vector<std::string>& diag() { return diag_; }

private:
    const json& j_;
    std::string where_;
    std::vector<std::string>& diag_;
    std::set<std::string> seen_;
};

inline std::optional<ScenarioKind> parse_kind(const std::string& s)
{
    if (s == "wind") return ScenarioKind::wind;
    if (s == "price") return ScenarioKind::price;
    if (s == "load") return ScenarioKind::load;
    if (s == "temperature") return ScenarioKind::temperature;
    if (s == "solar") return ScenarioKind::solar;
    return std::nullopt;
}

inline SeriesSource read_series(const json& j, const std::string& name, Unit expected, std::uint64_t seed, std::uint64_t stream,
                                const std::filesystem::path& base, std::vector<std::string>& diag)
{
    SeriesSource src;
    src.name = name;
    src.unit = expected;
    src.seed = derive_seed(seed, stream);
    Block b(j, name, diag);
    std::string unit;
    b.str("unit", unit);
    if (!unit.empty()) {
        const auto u = parse_unit(unit);
        if (!u) diag.push_back(b.path("unit") + ": unknown unit '" + unit + "'");
        else if (canonical(*u) != canonical(expected))
            diag.push_back(b.path("unit") + ": " + unit + " is not compatible with " + std::string(to_string(expected)));
        else src.unit = *u;
    }
    const bool has_path = b.has("path"), has_synth = b.has("synthesize");
    if (has_path == has_synth) {
        diag.push_back(name + ": give exactly one of 'path' or 'synthesize'");
        return src;
    }
    if (has_path) {
        std::string p;
        b.str("path", p);
        std::filesystem::path fp(p);
        if (fp.is_relative()) fp = base / fp;
        src.path = fp.lexically_normal().string();
        if (!std::filesystem::exists(*src.path)) diag.push_back(name + ": series file not found: " + *src.path);
        return src;
    }
    Block s(b.at("synthesize"), name + ".synthesize", diag);
    std::string kind;
    s.str("kind", kind);
    const auto k = parse_kind(kind);
    if (!k) diag.push_back(s.path("kind") + ": expected one of wind, price, load, temperature, solar");
    else src.kind = *k;
    if (k && canonical(default_unit(*k)) != canonical(src.unit))
        diag.push_back(s.path("kind") + ": " + kind + " profiles cannot serve as a " + std::string(to_string(src.unit)) + " series");
    s.integer("length", src.length);
    if (src.length < 1) diag.push_back(s.path("length") + ": must be >= 1");
    s.integer("seed", src.seed);
    s.num("mean", src.synth.mean);
    s.num("amplitude", src.synth.amplitude);
    s.num("period_steps", src.synth.period_steps);
    s.num("phase_steps", src.synth.phase_steps);
    s.num("noise", src.synth.noise);
    s.num("ar_coeff", src.synth.ar_coeff);
    s.num("step_minutes", src.synth.step_minutes);
    if (s.has("lower")) {
        double v = 0.0;
        s.num("lower", v);
        src.synth.lower = v;
    }
    if (s.has("upper")) {
        double v = 0.0;
        s.num("upper", v);
        src.synth.upper = v;
    }
    if (src.synth.lower && src.synth.upper && *src.synth.lower > *src.synth.upper)
        diag.push_back(s.path("lower") + ": lower bound exceeds upper bound");
    if (!(src.synth.period_steps > 0.0)) diag.push_back(s.path("period_steps") + ": must be positive");
    if (!(src.synth.step_minutes > 0.0)) diag.push_back(s.path("step_minutes") + ": must be positive");
    return src;
}

/// Scale applied to power/energy blocks given in MW/MWh.
inline double power_scale(Block& b, std::vector<std::string>& diag)
{
    std::string unit = "kW";
    b.str("unit", unit);
    if (unit == "kW") return 1.0;
    if (unit == "MW") return 1000.0;
    diag.push_back(b.path("unit") + ": expected kW or MW");
    return 1.0;
}

/// Returns the kW-per-block-unit scale so callers can convert related values.
inline double read_battery(Block& b, BatterySpec& spec, std::vector<std::string>& diag)
{
    const double k = power_scale(b, diag);
    BatterySpec raw = spec;
    for (double* v : {&raw.e_max, &raw.e_min, &raw.e_cap_max, &raw.p_charge_max, &raw.p_discharge_max}) *v /= k;
    b.num("e_max", raw.e_max);
    b.num("e_min", raw.e_min);
    b.num("e_cap_max", raw.e_cap_max);
    b.num("p_charge_max", raw.p_charge_max);
    b.num("p_discharge_max", raw.p_discharge_max);
    b.num("d_loss", raw.d_loss);
    b.num("delta_t", raw.delta_t);
    b.integer("n_parallel", raw.n_parallel);
    for (double* v : {&raw.e_max, &raw.e_min, &raw.e_cap_max, &raw.p_charge_max, &raw.p_discharge_max}) *v *= k;
    spec = raw;
    return k;
}

inline void prefixed(std::vector<std::string>& diag, const std::string& where, const std::vector<std::string>& msgs)
{
    for (const auto& m : msgs) diag.push_back(where + ": " + m);
}

inline void read_tcl(Block& b, TclParams& t)
{
    b.num("alpha", t.alpha);
    b.num("beta", t.beta);
    b.num("p_rated", t.p_rated);
    b.integer("n_units", t.n_units);
    b.num("band_low", t.band_low);
    b.num("band_high", t.band_high);
    b.integer("switch_delay_steps", t.switch_delay_steps);
}

inline void read_dg(Block& b, NetDg& g)
{
    b.num("a", g.a);
    b.num("b", g.b);
    b.num("p_min", g.p_min);
    b.num("p_max", g.p_max);
    b.num("u_min", g.u_min);
    b.num("u_max", g.u_max);
}

inline void read_net_bess(Block& b, NetBess& s, bool efficiency_convention, std::vector<std::string>& diag)
{
    b.num("gamma1", s.gamma1);
    b.num("gamma2", s.gamma2);
    b.num("e_min", s.e_min);
    b.num("e_max", s.e_max);
    b.num("u_min", s.u_min);
    b.num("u_max", s.u_max);
    b.num("e0", s.e0);
    if (b.has("d")) {
        double d = 0.0;
        b.num("d", d);
        if (efficiency_convention) {
            if (d > 0.0 && d <= 1.0) s.d = loss_from_efficiency(d);
            else diag.push_back(b.path("d") + ": efficiency must lie in (0, 1]");
        } else {
            s.d = d;
        }
    }
}

inline void read_cl(Block& b, NetCl& c)
{
    b.num("a", c.a);
    b.num("b", c.b);
    b.num("p_min", c.p_min);
    b.num("p_max", c.p_max);
    b.num("u_min", c.u_min);
    b.num("u_max", c.u_max);
}

inline void read_network(Block& b, ScenarioConfig& c, const std::filesystem::path& base, std::vector<std::string>& diag)
{
    std::string conv = "efficiency";
    b.str("d_convention", conv);
    if (conv != "efficiency" && conv != "loss") diag.push_back(b.path("d_convention") + ": expected 'efficiency' or 'loss'");
    const bool eff = conv == "efficiency";
    b.num("delta_h", c.network.delta_h);
    b.integer("horizon", c.network.horizon);

    if (b.has("reference_peak_load")) {
        const json& pk = b.at("reference_peak_load");
        if (!pk.is_array() || pk.size() != 3 || !std::all_of(pk.begin(), pk.end(), [](const json& x) { return x.is_number(); })) {
            diag.push_back(b.path("reference_peak_load") + ": expected three numbers");
        } else {
            std::vector<double> peaks;
            for (const auto& x : pk) peaks.push_back(x.get<double>());
            if (std::any_of(peaks.begin(), peaks.end(), [](double p) { return !(p > 0.0); }))
                diag.push_back(b.path("reference_peak_load") + ": peak loads must be positive");
            else c.network.mgs = reference_network(peaks).mgs;
            c.network.cems.bess.d = loss_from_efficiency(0.98);
        }
    }
    if (!b.has("microgrids") || !b.at("microgrids").is_array() || b.at("microgrids").empty()) {
        diag.push_back(b.path("microgrids") + ": expected a non-empty array");
        return;
    }
    const json& arr = b.at("microgrids");
    const bool from_reference = !c.network.mgs.empty();
    if (from_reference && arr.size() != c.network.mgs.size())
        diag.push_back(b.path("microgrids") + ": reference network has " + std::to_string(c.network.mgs.size()) + " microgrids");
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string w = b.path("microgrids") + "[" + std::to_string(i) + "]";
        Block m(arr[i], w, diag);
        if (!from_reference) c.network.mgs.emplace_back();
        if (i >= c.network.mgs.size()) continue;
        MicrogridSpec& spec = c.network.mgs[i];
        if (m.has("dg")) {
            Block g(m.at("dg"), w + ".dg", diag);
            read_dg(g, spec.dg);
        }
        if (m.has("bess")) {
            Block s(m.at("bess"), w + ".bess", diag);
            read_net_bess(s, spec.bess, eff, diag);
        }
        if (m.has("cl")) {
            Block s(m.at("cl"), w + ".cl", diag);
            read_cl(s, spec.cl);
        }
        m.num("exc_min", spec.exc_min);
        m.num("exc_max", spec.exc_max);
        m.num("pg0", spec.pg0);
        m.num("pcl0", spec.pcl0);
        NetworkMicrogridData data;
        const std::uint64_t stream = 100 + 2 * i;
        if (m.has("renewable")) data.renewable = read_series(m.at("renewable"), w + ".renewable", Unit::kW, c.seed, stream, base, diag);
        else diag.push_back(w + ".renewable: missing series");
        if (m.has("load")) data.load = read_series(m.at("load"), w + ".load", Unit::kW, c.seed, stream + 1, base, diag);
        else diag.push_back(w + ".load: missing series");
        c.network_data.push_back(std::move(data));
    }
    if (b.has("cems")) {
        Block cm(b.at("cems"), b.path("cems"), diag);
        if (cm.has("dg")) {
            Block g(cm.at("dg"), cm.path("dg"), diag);
            read_dg(g, c.network.cems.dg);
        }
        if (cm.has("bess")) {
            Block s(cm.at("bess"), cm.path("bess"), diag);
            read_net_bess(s, c.network.cems.bess, eff, diag);
        }
        cm.num("pg0", c.network.cems.pg0);
    }
    if (b.has("adp")) {
        Block a(b.at("adp"), b.path("adp"), diag);
        auto& p = c.network_adp;
        a.integer("iterations", p.iterations);
        a.integer("levels", p.levels);
        a.num("eps", p.eps);
        a.num("beta", p.beta);
        a.num("lambda", p.lambda);
        a.num("b0", p.b0);
        a.num("sample_sigma_fraction", p.sample_sigma_fraction);
        a.num("exploration", p.exploration);
        a.num("price_scale", p.scales.price);
        a.num("power_scale", p.scales.power);
    }
    prefixed(diag, b.path("network"), c.network.diagnostics());
    prefixed(diag, b.path("adp"), c.network_adp.diagnostics());
}

inline void require_series(ScenarioConfig& c, const json& jseries, const std::vector<std::pair<std::string, Unit>>& needed,
                           const std::filesystem::path& base, std::vector<std::string>& diag)
{
    Block b(jseries, "series", diag);
    std::uint64_t stream = 10;
    for (const auto& [name, unit] : needed) {
        if (!b.has(name)) {
            diag.push_back("series." + name + ": missing series");
        } else {
            c.series[name] = read_series(b.at(name), "series." + name, unit, c.seed, stream, base, diag);
        }
        ++stream;
    }
}

inline std::vector<std::pair<std::string, Unit>> series_for(Strategy s)
{
    switch (s) {
    case Strategy::dp_dispatch: return {{"renewable", Unit::kW}, {"load", Unit::kW}, {"price", Unit::currency_per_MWh}};
    case Strategy::adp_dispatch: return {{"wind", Unit::kW}, {"price", Unit::currency_per_MWh}};
    case Strategy::tcl_schedule: return {{"solar", Unit::kW}, {"t_out", Unit::celsius}};
    case Strategy::wind_smooth: return {{"wind", Unit::kW}, {"t_out", Unit::celsius}};
    case Strategy::network_adp: return {{"price", Unit::currency_per_MWh}};
    }
    return {};
}

}  // namespace detail

/// Parses a scenario file. Constraint violations are collected rather than
/// thrown; ConfigError is reserved for unreadable or malformed files.
inline ConfigLoad parse_config(const nlohmann::json& j, const std::filesystem::path& base)
{
    using detail::Block;
    ConfigLoad out;
    auto& c = out.config;
    auto& diag = out.diagnostics;
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    Block top(j, "", diag);

    int version = 1;
    top.integer("schema_version", version);
    if (version != 1) diag.push_back("schema_version: only version 1 is supported");

    std::string strategy;
    top.str("strategy", strategy);
    const auto st = parse_strategy(strategy);
    if (!st) {
        diag.push_back("strategy: expected one of dp-dispatch, adp-dispatch, tcl-schedule, wind-smooth, network-adp");
        return out;
    }
    c.strategy = *st;
    top.integer("seed", c.seed);
    top.str("output_dir", c.output_dir);
    top.integer("steps", c.steps);
    if (top.has("forecast_error")) {
        Block fe(top.at("forecast_error"), "forecast_error", diag);
        fe.num("sigma_fraction", c.forecast_sigma);
        if (c.forecast_sigma < 0.0) diag.push_back("forecast_error.sigma_fraction: must be non-negative");
    }

    const auto needed = detail::series_for(c.strategy);
    if (top.has("series")) detail::require_series(c, top.at("series"), needed, base, diag);
    else diag.push_back("series: missing block");

    const std::string section = [&] {
        std::string s = to_string(c.strategy);
        std::replace(s.begin(), s.end(), '-', '_');
        return s;
    }();
    for (const char* other : {"dp_dispatch", "adp_dispatch", "tcl_schedule", "wind_smooth", "network_adp"})
        if (section != other && top.has(other)) diag.push_back(std::string(other) + ": block does not belong to strategy " + to_string(c.strategy));
    if (!top.has(section)) {
        diag.push_back(section + ": missing parameter block");
        return out;
    }
    Block p(top.at(section), section, diag);

    switch (c.strategy) {
    case Strategy::dp_dispatch: {
        double k = 1.0;
        if (p.has("battery")) {
            Block b(p.at("battery"), p.path("battery"), diag);
            k = detail::read_battery(b, c.battery, diag);
        }
        if (p.has("cycle")) {
            Block b(p.at("cycle"), p.path("cycle"), diag);
            b.num("n_fail_100", c.cycle.n_fail_100);
            b.num("kp", c.cycle.kp);
            b.num("r_c", c.cycle.r_c);
        }
        p.integer("horizon_steps", c.dp_horizon);
        p.integer("grid_points", c.dp_grid);
        c.dp_e0 = 0.5 * (c.battery.e_min + c.battery.e_cap_max);
        if (p.has("e0")) {
            p.num("e0", c.dp_e0);
            c.dp_e0 *= k;  // same unit as the battery block
        }
        std::string mode = "exact";
        p.str("extreme_mode", mode);
        if (mode == "exact") c.extreme_mode = ExtremeMode::exact;
        else if (mode == "single_sigma") c.extreme_mode = ExtremeMode::single_sigma;
        else diag.push_back(p.path("extreme_mode") + ": expected exact or single_sigma");
        detail::prefixed(diag, section, c.battery.diagnostics());
        detail::prefixed(diag, section, c.cycle.diagnostics());
        if (c.dp_horizon < 1) diag.push_back(p.path("horizon_steps") + ": must be >= 1");
        if (c.dp_grid < 2) diag.push_back(p.path("grid_points") + ": must be >= 2");
        if (c.dp_e0 < c.battery.e_min || c.dp_e0 > c.battery.e_cap_max) diag.push_back(p.path("e0") + ": outside [e_min, e_cap_max]");
        break;
    }
    case Strategy::adp_dispatch: {
        auto& a = c.adp;
        if (p.has("life")) {
            Block b(p.at("life"), p.path("life"), diag);
            b.num("l_r", a.life.l_r);
            b.num("d_r", a.life.d_r);
            b.num("c_r", a.life.c_r);
            b.num("price", a.life.price);
            b.num("voltage", a.life.voltage);
        }
        p.num("lb", a.lb);
        p.num("ub", a.ub);
        p.num("r_d", a.r_d);
        p.num("r_c", a.r_c);
        p.num("state_step", a.state_step);
        p.integer("horizon", a.horizon);
        p.integer("long_price_window", a.long_price_window);
        p.num("stepsize_eps", a.stepsize_eps);
        p.num("stepsize_beta", a.stepsize_beta);
        p.integer("max_iterations", a.max_iterations);
        p.num("sample_sigma_fraction", a.sample_sigma_fraction);
        p.num("step_hours", a.step_hours);
        p.num("x0", a.x0);
        detail::prefixed(diag, section, a.diagnostics());
        break;
    }
    case Strategy::tcl_schedule: {
        auto& s = c.scheduler;
        if (p.has("dg")) {
            Block b(p.at("dg"), p.path("dg"), diag);
            b.num("a", s.dg.a);
            b.num("b", s.dg.b);
            b.num("c", s.dg.c);
            b.num("p_min", s.dg.p_min);
            b.num("p_max", s.dg.p_max);
        }
        if (p.has("bess")) {
            Block b(p.at("bess"), p.path("bess"), diag);
            b.num("gamma1", s.bess.gamma1);
            b.num("gamma2", s.bess.gamma2);
            b.num("p_min", s.bess.p_min);
            b.num("p_max", s.bess.p_max);
            b.num("x_min", s.bess.x_min);
            b.num("x_max", s.bess.x_max);
            b.num("delta_t", s.bess.delta_t);
            b.num("d_loss", s.bess.d_loss);
        }
        if (p.has("tcl")) {
            Block b(p.at("tcl"), p.path("tcl"), diag);
            detail::read_tcl(b, c.tcl);
        }
        p.num("eps_tolerance", s.eps_tolerance);
        p.num("c_cur", s.c_cur);
        p.integer("grid_points", s.grid_points);
        p.num("x0", c.sched_x0);
        p.integer("horizon", c.sched_horizon);
        std::string pol = "dp";
        p.str("policy", pol);
        if (pol == "dp") c.sched_policy = SchedulerPolicy::dynamic_programming;
        else if (pol == "greedy") c.sched_policy = SchedulerPolicy::greedy;
        else diag.push_back(p.path("policy") + ": expected dp or greedy");
        detail::prefixed(diag, section, s.diagnostics());
        detail::prefixed(diag, section, c.tcl.diagnostics());
        if (c.sched_horizon < 1) diag.push_back(p.path("horizon") + ": must be >= 1");
        if (c.sched_x0 < s.bess.x_min || c.sched_x0 > s.bess.x_max) diag.push_back(p.path("x0") + ": outside [x_min, x_max]");
        break;
    }
    case Strategy::wind_smooth: {
        auto& m = c.smoothing;
        const double k = detail::power_scale(p, diag);
        m.rr_min /= k;
        m.rr_max /= k;
        p.num("gamma_b", m.gamma_b);
        p.num("rr_min", m.rr_min);
        p.num("rr_max", m.rr_max);
        m.rr_min *= k;
        m.rr_max *= k;
        p.num("band_low", m.band_low);
        p.num("band_high", m.band_high);
        p.num("qp_tolerance", m.qp_tolerance);
        p.integer("qp_max_iters", m.qp_max_iters);
        p.integer("grid_points", m.grid_points);
        if (p.has("tcl")) {
            Block b(p.at("tcl"), p.path("tcl"), diag);
            detail::read_tcl(b, c.smooth_tcl);
        }
        if (p.has("battery")) {
            Block b(p.at("battery"), p.path("battery"), diag);
            detail::read_battery(b, c.smooth_bess, diag);
        }
        c.smooth_e0 = 0.5 * (c.smooth_bess.e_min + c.smooth_bess.e_cap_max);
        if (p.has("e0")) {
            p.num("e0", c.smooth_e0);
            c.smooth_e0 *= k;
        }
        bool pg_given = p.has("pg_prev");
        if (pg_given) {
            p.num("pg_prev", c.smooth_pg_prev);
            c.smooth_pg_prev *= k;
        } else {
            c.smooth_pg_prev = std::numeric_limits<double>::quiet_NaN();
        }
        p.integer("horizon", c.smooth_horizon);
        detail::prefixed(diag, section, m.diagnostics());
        detail::prefixed(diag, section, c.smooth_tcl.diagnostics());
        detail::prefixed(diag, section, c.smooth_bess.diagnostics());
        if (c.smooth_horizon < 2) diag.push_back(p.path("horizon") + ": must be >= 2");
        if (c.smooth_e0 < c.smooth_bess.e_min || c.smooth_e0 > c.smooth_bess.e_cap_max) diag.push_back(p.path("e0") + ": outside [e_min, e_cap_max]");
        break;
    }
    case Strategy::network_adp: read_network(p, c, base, diag); break;
    }
    if (c.steps < 1 && c.strategy != Strategy::network_adp) diag.push_back("steps: must be >= 1");
    return out;
}

inline ConfigLoad load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot read config");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    const auto base = std::filesystem::absolute(path).parent_path();
    return parse_config(j, base);
}

/// Materialises a series source in internal units.
inline TimeSeries resolve_series(const SeriesSource& src)
{
    if (src.path) return load_series(*src.path, src.unit);
    TimeSeries ts = synthesize_scenario(src.kind, src.length, src.seed, src.synth);
    if (canonical(default_unit(src.kind)) != canonical(src.unit))
        throw std::invalid_argument(src.name + ": synthesised " + std::string(to_string(default_unit(src.kind))) + " series cannot serve as " +
                                    std::string(to_string(src.unit)));
    if (src.unit == Unit::MW || src.unit == Unit::MWh)
        for (double& v : ts.values) v *= 1000.0;
    ts.unit = canonical(src.unit);
    return ts;
}

}  // namespace mgopt
