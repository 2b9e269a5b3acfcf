#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mgopt/common.hpp"

namespace mgopt {

enum class Unit { kW, MW, kWh, MWh, currency_per_MWh, celsius };

inline std::string_view to_string(Unit u)
{
    switch (u) {
    case Unit::kW: return "kW";
    case Unit::MW: return "MW";
    case Unit::kWh: return "kWh";
    case Unit::MWh: return "MWh";
    case Unit::currency_per_MWh: return "currency_per_MWh";
    case Unit::celsius: return "celsius";
    }
    return "?";
}

inline std::optional<Unit> parse_unit(std::string_view s)
{
    for (Unit u : {Unit::kW, Unit::MW, Unit::kWh, Unit::MWh, Unit::currency_per_MWh, Unit::celsius})
        if (to_string(u) == s) return u;
    return std::nullopt;
}

/// Internal units: power in kW, energy in kWh. MW/MWh files are scaled at load.
inline Unit canonical(Unit u)
{
    if (u == Unit::MW) return Unit::kW;
    if (u == Unit::MWh) return Unit::kWh;
    return u;
}

inline bool is_physical_quantity(Unit u)
{
    return u == Unit::kW || u == Unit::MW || u == Unit::kWh || u == Unit::MWh;
}

/// Uniformly sampled piecewise-constant signal.
struct TimeSeries {
    std::int64_t start_index = 0;
    double step_minutes = 5.0;
    std::vector<double> values;
    Unit unit = Unit::kW;

    std::size_t size() const { return values.size(); }
    bool empty() const { return values.empty(); }
    double operator[](std::size_t i) const { return values[i]; }
    double step_hours() const { return step_minutes / 60.0; }

    double mean() const
    {
        if (values.empty()) throw std::invalid_argument("mean of empty series");
        return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    }

    friend bool operator==(const TimeSeries&, const TimeSeries&) = default;
};

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::optional<double> parse_double(std::string_view s)
{
    std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    double v = 0.0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) return std::nullopt;
    return v;
}

inline std::optional<std::int64_t> parse_int(std::string_view s)
{
    std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    std::int64_t v = 0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) return std::nullopt;
    return v;
}

}  // namespace detail

/// Parses the two-column series format:
///
///     # unit=<tag> step_minutes=<n>
///     <index>,<value>
///     ...
///
/// Indices must be consecutive. MW and MWh bodies are converted to kW/kWh;
/// `expected` may name either the file unit or its canonical counterpart.
inline TimeSeries parse_series(std::istream& in, Unit expected, const std::string& origin = "<stream>")
{
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(origin + ": empty series");
    const std::string header = detail::trim(line);
    if (header.empty() || header[0] != '#') throw std::runtime_error(origin + ":1: missing '# unit=... step_minutes=...' header");

    std::optional<Unit> unit;
    std::optional<double> step;
    std::istringstream hs(header.substr(1));
    std::string tok;
    while (hs >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        if (key == "unit") {
            unit = parse_unit(val);
            if (!unit) throw std::runtime_error(origin + ":1: unknown unit '" + val + "'");
        } else if (key == "step_minutes") {
            step = detail::parse_double(val);
            if (!step || *step <= 0.0) throw std::runtime_error(origin + ":1: invalid step_minutes '" + val + "'");
        }
    }
    if (!unit) throw std::runtime_error(origin + ":1: header lacks unit=");
    if (!step) throw std::runtime_error(origin + ":1: header lacks step_minutes=");
    if (canonical(*unit) != canonical(expected))
        throw std::runtime_error(origin + ": unit mismatch, file has " + std::string(to_string(*unit)) + ", expected " +
                                 std::string(to_string(expected)));

    const double scale = (*unit == Unit::MW || *unit == Unit::MWh) ? 1000.0 : 1.0;

    TimeSeries ts;
    ts.step_minutes = *step;
    ts.unit = canonical(*unit);
    std::size_t lineno = 1;
    std::optional<std::int64_t> prev_index;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string row = detail::trim(line);
        if (row.empty()) continue;
        const auto comma = row.find(',');
        if (comma == std::string::npos) throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected 'index,value'");
        const auto idx = detail::parse_int(std::string_view(row).substr(0, comma));
        const auto val = detail::parse_double(std::string_view(row).substr(comma + 1));
        if (!idx) throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": non-integer index");
        if (!val || !std::isfinite(*val)) throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": non-numeric value");
        if (prev_index && *idx != *prev_index + 1)
            throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": index not consecutive");
        if (!prev_index) ts.start_index = *idx;
        prev_index = idx;
        ts.values.push_back(*val * scale);
    }
    if (ts.values.empty()) throw std::runtime_error(origin + ": empty series");
    return ts;
}

inline TimeSeries load_series(const std::string& path, Unit expected)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open series file");
    return parse_series(in, expected, path);
}

inline void write_series(std::ostream& out, const TimeSeries& ts)
{
    out << "# unit=" << to_string(ts.unit) << " step_minutes=" << format_double(ts.step_minutes) << '\n';
    for (std::size_t i = 0; i < ts.values.size(); ++i)
        out << ts.start_index + static_cast<std::int64_t>(i) << ',' << format_double(ts.values[i]) << '\n';
}

inline void write_series(const std::string& path, const TimeSeries& ts)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot write series file");
    write_series(out, ts);
}

struct ForecastErrorSpec {
    double sigma_fraction = 0.0;  ///< std dev as a fraction of mean(|series|)
    std::uint64_t seed = 0;
};

/// Adds i.i.d. N(0, (sigma_fraction * mean|x|)^2) noise to every sample.
/// Power and energy series are clamped at zero afterwards.
inline TimeSeries inject_forecast_error(const TimeSeries& series, const ForecastErrorSpec& spec)
{
    if (series.empty()) throw std::invalid_argument("inject_forecast_error: empty series");
    if (spec.sigma_fraction < 0.0) throw std::invalid_argument("inject_forecast_error: negative sigma_fraction");
    if (spec.sigma_fraction == 0.0) return series;

    double mean_abs = 0.0;
    for (double v : series.values) mean_abs += std::abs(v);
    mean_abs /= static_cast<double>(series.size());
    const double sigma = spec.sigma_fraction * mean_abs;

    TimeSeries out = series;
    GaussianSource rng(spec.seed);
    const bool clamp = is_physical_quantity(series.unit);
    for (double& v : out.values) {
        v += sigma * rng.normal();
        if (clamp && v < 0.0) v = 0.0;
    }
    return out;
}

/// Values covering positions [k0, k0 + n) of the series.
inline TimeSeries horizon_window(const TimeSeries& series, std::size_t k0, std::size_t n)
{
    if (k0 + n > series.size())
        throw std::out_of_range("horizon_window: [" + std::to_string(k0) + ", " + std::to_string(k0 + n) +
                                ") exceeds series length " + std::to_string(series.size()));
    TimeSeries out;
    out.start_index = series.start_index + static_cast<std::int64_t>(k0);
    out.step_minutes = series.step_minutes;
    out.unit = series.unit;
    out.values.assign(series.values.begin() + static_cast<std::ptrdiff_t>(k0),
                      series.values.begin() + static_cast<std::ptrdiff_t>(k0 + n));
    return out;
}

enum class ScenarioKind { wind, price, load, temperature, solar };

struct SynthesisParams {
    double mean = 0.0;
    double amplitude = 0.0;       ///< diurnal sinusoid amplitude
    double period_steps = 288.0;  ///< diurnal period in samples
    double phase_steps = 0.0;
    double noise = 0.0;           ///< AR(1) innovation std dev, absolute units
    double ar_coeff = 0.9;
    std::optional<double> lower;  ///< clamp bounds; wind/load/solar default to 0 below
    std::optional<double> upper;
    double step_minutes = 5.0;
};

inline Unit default_unit(ScenarioKind kind)
{
    switch (kind) {
    case ScenarioKind::price: return Unit::currency_per_MWh;
    case ScenarioKind::temperature: return Unit::celsius;
    default: return Unit::kW;
    }
}

/// Reproducible synthetic profile: mean + amplitude*sin(2*pi*(k+phase)/period) + AR(1) noise,
/// clamped into [lower, upper]. Sample 0 carries no noise.
inline TimeSeries synthesize_scenario(ScenarioKind kind, std::int64_t length, std::uint64_t seed, const SynthesisParams& p)
{
    if (length < 1) throw std::invalid_argument("synthesize_scenario: length must be >= 1");
    if (p.period_steps <= 0.0) throw std::invalid_argument("synthesize_scenario: period_steps must be positive");

    std::optional<double> lower = p.lower;
    if (!lower && (kind == ScenarioKind::wind || kind == ScenarioKind::load || kind == ScenarioKind::solar)) lower = 0.0;

    TimeSeries ts;
    ts.step_minutes = p.step_minutes;
    ts.unit = default_unit(kind);
    ts.values.resize(static_cast<std::size_t>(length));
    GaussianSource rng(seed);
    double ar = 0.0;
    for (std::int64_t k = 0; k < length; ++k) {
        if (k > 0) ar = p.ar_coeff * ar + p.noise * rng.normal();
        double v = p.mean + p.amplitude * std::sin(2.0 * std::numbers::pi * (static_cast<double>(k) + p.phase_steps) / p.period_steps) + ar;
        if (lower && v < *lower) v = *lower;
        if (p.upper && v > *p.upper) v = *p.upper;
        ts.values[static_cast<std::size_t>(k)] = v;
    }
    return ts;
}

}  // namespace mgopt
