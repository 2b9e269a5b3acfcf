#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgopt/config.hpp"

namespace mgopt {

inline constexpr int kReportSchemaVersion = 1;

struct RunSummary {
    double objective = 0.0;
    double baseline = 0.0;
    double improvement_percent = 0.0;
};

/// Relative gain of the objective over the baseline. For costs lower is
/// better; for incomes pass maximise = true.
inline double improvement(double objective, double baseline, bool maximise = false)
{
    if (baseline == 0.0) return 0.0;
    const double gain = maximise ? objective - baseline : baseline - objective;
    return 100.0 * gain / std::abs(baseline);
}

namespace detail {

/// Column-oriented CSV with a header row; values use round-trip formatting.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void row(const std::vector<double>& values)
    {
        if (values.size() != header_.size()) throw std::logic_error("csv: row width does not match header");
        rows_.push_back(values);
    }

    std::size_t rows() const { return rows_.size(); }

    void write(const std::filesystem::path& path) const
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error(path.string() + ": cannot write");
        for (std::size_t i = 0; i < header_.size(); ++i) out << (i ? "," : "") << header_[i];
        out << '\n';
        for (const auto& r : rows_) {
            for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << format_double(r[i]);
            out << '\n';
        }
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<double>> rows_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path.string() + ": cannot write");
    out << text;
}

inline void emit_series(const std::filesystem::path& dir, const std::string& name, const std::vector<double>& values, Unit unit,
                        double step_minutes)
{
    TimeSeries ts;
    ts.values = values;
    ts.unit = unit;
    ts.step_minutes = step_minutes;
    std::filesystem::create_directories(dir / "series");
    std::ofstream out(dir / "series" / (name + ".csv"), std::ios::binary);
    if (!out) throw std::runtime_error((dir / "series" / (name + ".csv")).string() + ": cannot write");
    write_series(out, ts);
}

inline nlohmann::json summary_json(const RunSummary& s)
{
    return {{"objective", s.objective}, {"baseline", s.baseline}, {"improvement_percent", s.improvement_percent}};
}

inline nlohmann::json dispatch_eval_json(const DispatchEvaluation& e)
{
    return {{"bess_cost", e.bess_cost},
            {"trading_cost", e.trading_cost},
            {"overall_cost", e.overall_cost},
            {"baseline_cost", e.baseline_cost},
            {"improvement_percent", e.improvement_percent()}};
}

inline RunSummary run_dp_dispatch(const ScenarioConfig& c, const std::filesystem::path& dir, nlohmann::json& rep)
{
    DispatchScenario sc;
    sc.renewable = resolve_series(c.series.at("renewable"));
    sc.load = resolve_series(c.series.at("load"));
    sc.price = resolve_series(c.series.at("price"));
    sc.battery = c.battery;
    sc.cycle = c.cycle;
    sc.horizon_steps = c.dp_horizon;
    sc.grid_points = c.dp_grid;
    const auto run = receding_horizon_run(sc, c.dp_e0, c.steps, c.error_spec(), c.extreme_mode);

    rep["planning"] = dispatch_eval_json(run.planning);
    rep["actual"] = dispatch_eval_json(run.actual);
    rep["half_cycles"] = run.half_cycles.size();

    CsvTable steps({"step", "renewable_kw", "load_kw", "price_per_mwh", "p_b_kw", "p_grid_kw", "energy_kwh", "trading_cost"});
    CsvTable soc({"step", "energy_kwh", "soc"});
    CsvTable act({"step", "price_per_mwh", "p_b_kw"});
    for (std::size_t k = 0; k < c.steps; ++k) {
        steps.row({double(k), sc.renewable[k], sc.load[k], sc.price[k], run.executed_actions[k], run.p_grid[k], run.trajectory[k], run.step_cost[k]});
        act.row({double(k), sc.price[k], run.executed_actions[k]});
    }
    for (std::size_t k = 0; k < run.trajectory.size(); ++k) soc.row({double(k), run.trajectory[k], run.trajectory[k] / sc.battery.e_max});
    steps.write(dir / "steps.csv");
    soc.write(dir / "soc_trace.csv");
    act.write(dir / "actions_vs_price.csv");
    const double step = sc.price.step_minutes;
    emit_series(dir, "energy", run.trajectory, Unit::kWh, step);
    emit_series(dir, "p_b", run.executed_actions, Unit::kW, step);
    emit_series(dir, "p_grid", run.p_grid, Unit::kW, step);
    return {run.actual.overall_cost, run.actual.baseline_cost, run.actual.improvement_percent()};
}

inline RunSummary run_adp_dispatch(const ScenarioConfig& c, const std::filesystem::path& dir, nlohmann::json& rep)
{
    const TimeSeries wind = resolve_series(c.series.at("wind"));
    const TimeSeries price = resolve_series(c.series.at("price"));
    const ForecastErrorSpec err = c.error_spec();
    const auto run = adp_dispatch_run(wind, price, c.adp, err, c.steps);

    // The same actions settled against the forecasts the planner saw.
    const TimeSeries wind_fc = inject_forecast_error(wind, {err.sigma_fraction, derive_seed(err.seed, 0)});
    const TimeSeries price_fc = inject_forecast_error(price, {err.sigma_fraction, derive_seed(err.seed, 1)});
    std::vector<double> w_fc, p_fc, w_act, p_act;
    for (std::size_t k = 0; k < c.steps; ++k) {
        w_fc.push_back(wind_energy_wh(wind_fc[k], c.adp.step_hours));
        p_fc.push_back(price_fc[k]);
        w_act.push_back(wind_energy_wh(wind[k], c.adp.step_hours));
        p_act.push_back(price[k]);
    }
    std::vector<double> feasible = run.actions;
    {
        int xi = c.adp.index_of(c.adp.x0);
        for (std::size_t k = 0; k < feasible.size(); ++k) {
            const ActionRange r = action_range(xi, w_fc[k], c.adp);
            const int s = std::clamp(static_cast<int>(std::lround(feasible[k] / c.adp.state_step)), r.lo, r.hi);
            feasible[k] = c.adp.state_step * s;
            xi += s;
        }
    }
    const auto plan = settle(w_fc, p_fc, feasible, c.adp.x0, c.adp);
    const auto plan_base = settle(w_fc, p_fc, cycling_policy(w_fc, c.adp), c.adp.x0, c.adp);

    auto ev = [](double income, double opr, double additional, double base_additional) {
        return nlohmann::json{{"income", income},
                              {"throughput_cost", opr},
                              {"additional_income", additional},
                              {"baseline_additional_income", base_additional},
                              {"improvement_percent", improvement(additional, base_additional, true)}};
    };
    rep["planning"] = ev(plan.income, plan.opr, plan.additional, plan_base.additional);
    rep["actual"] = ev(run.income, run.throughput_cost, run.additional_income, run.baseline_additional_income);
    rep["actual"]["lifetime_hours"] = std::isfinite(run.lifetime_hours) ? nlohmann::json(run.lifetime_hours) : nlohmann::json(nullptr);
    rep["actual"]["baseline_income"] = run.baseline_income;
    rep["actual"]["baseline_throughput_cost"] = run.baseline_throughput_cost;

    CsvTable steps({"step", "wind_wh", "price_per_mwh", "m_rm", "u_wh", "grid_wh", "state_wh", "income", "throughput_cost"});
    CsvTable soc({"step", "state_wh", "baseline_state_wh"});
    CsvTable act({"step", "price_per_mwh", "u_wh"});
    for (std::size_t k = 0; k < c.steps; ++k) {
        steps.row({double(k), w_act[k], run.price[k], run.m_rm[k], run.actions[k], run.grid_wh[k], run.states[k], run.step_income[k], run.step_opr[k]});
        act.row({double(k), run.price[k], run.actions[k]});
    }
    for (std::size_t k = 0; k < run.states.size(); ++k) soc.row({double(k), run.states[k], run.baseline_states[k]});
    steps.write(dir / "steps.csv");
    soc.write(dir / "soc_trace.csv");
    act.write(dir / "actions_vs_price.csv");
    std::vector<double> kwh;
    for (double x : run.states) kwh.push_back(x / 1000.0);
    emit_series(dir, "energy", kwh, Unit::kWh, wind.step_minutes);
    return {run.additional_income, run.baseline_additional_income, improvement(run.additional_income, run.baseline_additional_income, true)};
}

inline nlohmann::json dg_eval_json(const DgRunReport& r)
{
    return {{"total_cost", r.total_cost},
            {"dg_cost", r.dg_cost},
            {"bess_cost", r.bess_cost},
            {"curtailment_cost", r.curtailment_cost},
            {"unmet_steps", r.unmet_steps}};
}

inline RunSummary run_tcl_schedule(const ScenarioConfig& c, const std::filesystem::path& dir, nlohmann::json& rep)
{
    const TimeSeries solar = resolve_series(c.series.at("solar"));
    const TimeSeries t_out = resolve_series(c.series.at("t_out"));
    const ForecastErrorSpec err = c.error_spec();
    const auto baseline_policy = c.sched_policy == SchedulerPolicy::greedy ? SchedulerPolicy::dynamic_programming : SchedulerPolicy::greedy;
    const auto run = dg_receding_run(solar, t_out, c.scheduler, c.tcl, c.sched_x0, c.sched_horizon, c.steps, err, c.sched_policy);
    const auto base = dg_receding_run(solar, t_out, c.scheduler, c.tcl, c.sched_x0, c.sched_horizon, c.steps, err, baseline_policy);

    const TimeSeries solar_fc = inject_forecast_error(solar, {err.sigma_fraction, derive_seed(err.seed, 0)});
    const TimeSeries t_fc = inject_forecast_error(t_out, {err.sigma_fraction, derive_seed(err.seed, 1)});
    const auto plan = dg_receding_run(solar_fc, t_fc, c.scheduler, c.tcl, c.sched_x0, c.sched_horizon, c.steps, {}, c.sched_policy);
    const auto plan_base = dg_receding_run(solar_fc, t_fc, c.scheduler, c.tcl, c.sched_x0, c.sched_horizon, c.steps, {}, baseline_policy);

    rep["policy"] = c.sched_policy == SchedulerPolicy::greedy ? "greedy" : "dp";
    rep["planning"] = dg_eval_json(plan);
    rep["planning"]["baseline"] = dg_eval_json(plan_base);
    rep["actual"] = dg_eval_json(run);
    rep["actual"]["baseline"] = dg_eval_json(base);

    CsvTable steps({"step", "t_out_c", "solar_kw", "demand_kw", "p_g_kw", "p_b_kw", "p_cur_kw", "energy_kwh", "stage_cost"});
    CsvTable soc({"step", "energy_kwh", "baseline_energy_kwh"});
    for (std::size_t k = 0; k < c.steps; ++k)
        steps.row({double(k), t_out[k], run.solar[k], run.demand[k], run.p_g[k], run.p_b[k], run.p_cur[k], run.x[k], run.stage_cost[k]});
    for (std::size_t k = 0; k < run.x.size(); ++k) soc.row({double(k), run.x[k], base.x[k]});
    steps.write(dir / "steps.csv");
    soc.write(dir / "soc_trace.csv");
    emit_series(dir, "energy", run.x, Unit::kWh, solar.step_minutes);
    emit_series(dir, "p_g", run.p_g, Unit::kW, solar.step_minutes);
    return {run.total_cost, base.total_cost, improvement(run.total_cost, base.total_cost)};
}

inline nlohmann::json smoothing_eval_json(const SmoothingRunReport& r)
{
    return {{"dispatched_variation", r.dispatched_variation},
            {"raw_variation", r.raw_variation},
            {"storage_cost", r.storage_cost},
            {"ramp_violations", r.ramp_violations},
            {"raw_ramp_violations", r.raw_ramp_violations},
            {"infeasible_plans", r.infeasible_plans},
            {"improvement_percent", improvement(r.dispatched_variation, r.raw_variation)}};
}

inline RunSummary run_wind_smooth(const ScenarioConfig& c, const std::filesystem::path& dir, nlohmann::json& rep)
{
    const TimeSeries wind = resolve_series(c.series.at("wind"));
    const TimeSeries t_out = resolve_series(c.series.at("t_out"));
    const ForecastErrorSpec err = c.error_spec();
    const double pg0 = std::isnan(c.smooth_pg_prev) ? wind[0] : c.smooth_pg_prev;
    const auto run = wind_smoothing_run(wind, t_out, c.smooth_tcl, c.smoothing, c.smooth_bess, c.smooth_e0, pg0, c.smooth_horizon, c.steps, err);

    const TimeSeries w_fc = inject_forecast_error(wind, {err.sigma_fraction, derive_seed(err.seed, 0)});
    const TimeSeries t_fc = inject_forecast_error(t_out, {err.sigma_fraction, derive_seed(err.seed, 1)});
    const auto plan = wind_smoothing_run(w_fc, t_fc, c.smooth_tcl, c.smoothing, c.smooth_bess, c.smooth_e0, pg0, c.smooth_horizon, c.steps, {});

    rep["planning"] = smoothing_eval_json(plan);
    rep["actual"] = smoothing_eval_json(run);

    CsvTable steps({"step", "t_out_c", "raw_wind_kw", "setpoint_c", "pw_tcl_kw", "p_b_kw", "p_g_kw", "delta_pg_kw", "energy_kwh"});
    CsvTable plot({"step", "raw_wind_kw", "pw_tcl_kw", "p_g_kw"});
    for (std::size_t k = 0; k < c.steps; ++k) {
        steps.row({double(k), t_out[k], run.raw_wind[k], run.setpoints[k], run.pw_tcl[k], run.p_b[k], run.p_g[k], run.delta_pg[k], run.x[k]});
        plot.row({double(k), run.raw_wind[k], run.pw_tcl[k], run.p_g[k]});
    }
    steps.write(dir / "steps.csv");
    plot.write(dir / "smoothed_vs_raw.csv");
    CsvTable soc({"step", "energy_kwh"});
    for (std::size_t k = 0; k < run.x.size(); ++k) soc.row({double(k), run.x[k]});
    soc.write(dir / "soc_trace.csv");
    emit_series(dir, "p_g", run.p_g, Unit::kW, wind.step_minutes);
    emit_series(dir, "raw_wind", run.raw_wind, Unit::kW, wind.step_minutes);
    return {run.dispatched_variation, run.raw_variation, improvement(run.dispatched_variation, run.raw_variation)};
}

inline NetworkPath network_path_from(const ScenarioConfig& c, double& step_minutes)
{
    NetworkPath path;
    const TimeSeries price = resolve_series(c.series.at("price"));
    step_minutes = price.step_minutes;
    for (double v : price.values) path.ep.push_back(v / 1000.0);  // per kWh
    for (const auto& d : c.network_data) {
        path.res.push_back(resolve_series(d.renewable).values);
        path.load.push_back(resolve_series(d.load).values);
    }
    return path;
}

inline nlohmann::json network_eval_json(const NetworkEvaluation& adp, const NetworkEvaluation& myopic)
{
    return {{"adp_total_cost", adp.total}, {"myopic_total_cost", myopic.total}, {"improvement_percent", improvement(adp.total, myopic.total)}};
}

inline RunSummary run_network_adp(const ScenarioConfig& c, const std::filesystem::path& dir, nlohmann::json& rep)
{
    double step_minutes = 5.0;
    const NetworkPath path = network_path_from(c, step_minutes);
    const auto run = network_adp_run(c.network, path, c.forecast_sigma, c.error_spec().seed, c.network_adp, c.train_seed());

    rep["planning"] = network_eval_json(run.adp_planning, run.myopic_planning);
    rep["actual"] = network_eval_json(run.adp_actual, run.myopic_actual);
    rep["iterations"] = run.training.cost_trace.size();
    rep["microgrids"] = c.network.K();

    CsvTable trace({"iteration", "total_cost"});
    for (std::size_t n = 0; n < run.training.cost_trace.size(); ++n) trace.row({double(n + 1), run.training.cost_trace[n]});
    trace.write(dir / "cost_trace.csv");

    const int K = c.network.K();
    std::vector<std::string> head{"stage", "ep_per_kwh"};
    for (int i = 0; i < K; ++i) head.push_back("exchange_mg" + std::to_string(i + 1) + "_kw");
    head.insert(head.end(), {"p_ug_kw", "stage_cost", "myopic_stage_cost"});
    CsvTable steps(head);
    CsvTable soc([&] {
        std::vector<std::string> h{"stage"};
        for (int i = 0; i < K; ++i) h.push_back("energy_mg" + std::to_string(i + 1) + "_kwh");
        h.push_back("energy_cems_kwh");
        return h;
    }());
    const auto& ev = run.adp_actual;
    for (std::size_t t = 0; t < ev.stage_cost.size(); ++t) {
        std::vector<double> r{double(t), ev.ep[t]};
        for (int i = 0; i < K; ++i) r.push_back(ev.exchange[t][static_cast<std::size_t>(i)]);
        r.insert(r.end(), {ev.p_ug[t], ev.stage_cost[t], run.myopic_actual.stage_cost[t]});
        steps.row(r);
        std::vector<double> e{double(t)};
        for (int i = 0; i < K; ++i) e.push_back(ev.states[t].e(i));
        e.push_back(ev.states[t].cems_e());
        soc.row(e);
    }
    steps.write(dir / "steps.csv");
    soc.write(dir / "soc_trace.csv");

    CsvTable theta({"stage", "index", "value"});
    for (std::size_t t = 0; t < run.training.vfa.size(); ++t) {
        const auto& th = run.training.vfa[t].theta;
        for (Eigen::Index i = 0; i < th.size(); ++i) theta.row({double(t), double(i), th[i]});
    }
    theta.write(dir / "theta.csv");
    emit_series(dir, "p_ug", ev.p_ug, Unit::kW, step_minutes);
    return {ev.total, run.myopic_actual.total, improvement(ev.total, run.myopic_actual.total)};
}

}  // namespace detail

/// Executes the configured strategy and writes report.json, steps.csv and the
/// plot tables into dir.
inline RunSummary run_scenario(const ScenarioConfig& c, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    nlohmann::json rep;
    rep["schema_version"] = kReportSchemaVersion;
    rep["strategy"] = to_string(c.strategy);
    rep["seed"] = c.seed;
    rep["steps"] = c.steps;
    rep["forecast_sigma_fraction"] = c.forecast_sigma;
    RunSummary s;
    switch (c.strategy) {
    case Strategy::dp_dispatch: s = detail::run_dp_dispatch(c, dir, rep); break;
    case Strategy::adp_dispatch: s = detail::run_adp_dispatch(c, dir, rep); break;
    case Strategy::tcl_schedule: s = detail::run_tcl_schedule(c, dir, rep); break;
    case Strategy::wind_smooth: s = detail::run_wind_smooth(c, dir, rep); break;
    case Strategy::network_adp: s = detail::run_network_adp(c, dir, rep); break;
    }
    rep["summary"] = detail::summary_json(s);
    detail::write_text(dir / "report.json", rep.dump(2) + "\n");
    return s;
}

}  // namespace mgopt
