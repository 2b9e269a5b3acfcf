#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgopt/common.hpp"

namespace mgopt {

/// Networked microgrids: K microgrids plus a central unit (CEMS) that balances
/// their exchange against the utility grid. Powers in kW, energy in kWh,
/// prices in currency per kWh. Microgrid indices are 0-based.

struct NetDg {
    double a = 0.3;  ///< per kW of output
    double b = 0.05;
    double p_min = 20.0;
    double p_max = 50.0;
    double u_min = -20.0;
    double u_max = 20.0;
};

struct NetBess {
    double gamma1 = 0.08;
    double gamma2 = 0.08;
    double e_min = 40.0;
    double e_max = 160.0;
    double u_min = -150.0;
    double u_max = 150.0;
    double d = 0.05;  ///< loss factor applied to |u * delta|
    double e0 = 100.0;
};

struct NetCl {
    double a = 0.33;
    double b = 0.05;
    double p_min = 0.0;
    double p_max = 60.0;
    double u_min = -15.0;
    double u_max = 15.0;
};

struct MicrogridSpec {
    NetDg dg;
    NetBess bess;
    NetCl cl;
    double exc_min = -500.0;
    double exc_max = 500.0;
    double pg0 = 20.0;
    double pcl0 = 0.0;
};

struct CemsSpec {
    NetDg dg{0.31, 0.06, 100.0, 500.0, -50.0, 50.0};
    NetBess bess{0.08, 0.08, 80.0, 360.0, -300.0, 300.0, 0.02, 240.0};
    double pg0 = 100.0;
};

struct NetworkConfig {
    std::vector<MicrogridSpec> mgs;
    CemsSpec cems;
    double delta_h = 1.0 / 12.0;
    int horizon = 12;

    int K() const { return static_cast<int>(mgs.size()); }

    /// Every violated constraint, empty when the configuration is usable.
    std::vector<std::string> diagnostics() const
    {
        std::vector<std::string> out;
        auto ordered = [&](double lo, double hi, const std::string& what) {
            if (!(lo <= hi)) out.push_back(what + ": lower bound exceeds upper bound");
        };
        auto ramp = [&](double lo, double hi, const std::string& what) {
            if (!(lo <= 0.0 && 0.0 <= hi)) out.push_back(what + ": need min <= 0 <= max");
        };
        auto bess = [&](const NetBess& b, const std::string& w) {
            ordered(b.e_min, b.e_max, w + ".bess energy");
            ramp(b.u_min, b.u_max, w + ".bess power");
            if (!(b.d >= 0.0 && b.d < 1.0)) out.push_back(w + ".bess loss factor must lie in [0, 1)");
            if (!(b.gamma1 >= 0.0 && b.gamma2 >= 0.0)) out.push_back(w + ".bess cost coefficients must be non-negative");
            if (!(b.e0 >= b.e_min && b.e0 <= b.e_max)) out.push_back(w + ".bess initial energy outside bounds");
        };
        auto dg = [&](const NetDg& g, double pg0, const std::string& w) {
            ordered(g.p_min, g.p_max, w + ".dg output");
            ramp(g.u_min, g.u_max, w + ".dg ramp");
            if (!(pg0 >= g.p_min && pg0 <= g.p_max)) out.push_back(w + ".dg initial output outside bounds");
        };
        if (mgs.empty()) out.push_back("network: need at least one microgrid");
        for (int i = 0; i < K(); ++i) {
            const auto& m = mgs[static_cast<std::size_t>(i)];
            const std::string w = "mg" + std::to_string(i + 1);
            dg(m.dg, m.pg0, w);
            bess(m.bess, w);
            ordered(m.cl.p_min, m.cl.p_max, w + ".cl power");
            ramp(m.cl.u_min, m.cl.u_max, w + ".cl ramp");
            if (m.cl.p_min < 0.0) out.push_back(w + ".cl minimum must be non-negative");
            if (!(m.pcl0 >= m.cl.p_min && m.pcl0 <= m.cl.p_max)) out.push_back(w + ".cl initial power outside bounds");
            ramp(m.exc_min, m.exc_max, w + ".exchange limits");
        }
        dg(cems.dg, cems.pg0, "cems");
        bess(cems.bess, "cems");
        if (!(delta_h > 0.0)) out.push_back("network: delta_h must be positive");
        if (horizon < 1) out.push_back("network: horizon must be >= 1");
        return out;
    }

    void validate() const
    {
        const auto d = diagnostics();
        if (!d.empty()) throw std::invalid_argument(d.front());
    }
};

inline int state_dim(int K) { return 5 * K + 3; }
inline int control_dim(int K) { return 3 * K + 2; }
inline int exogenous_dim(int K) { return 2 * K + 1; }

/// Loss factor from an efficiency-style table entry (0.95 -> 0.05).
inline double loss_from_efficiency(double efficiency)
{
    if (!(efficiency > 0.0 && efficiency <= 1.0)) throw std::invalid_argument("loss_from_efficiency: efficiency must lie in (0, 1]");
    return 1.0 - efficiency;
}

/// Tabulated three-microgrid network. CL limits follow from each
/// microgrid's peak load: 20% range, 5% rate.
inline NetworkConfig reference_network(const std::vector<double>& peak_load)
{
    if (peak_load.size() != 3) throw std::invalid_argument("reference_network: need three peak loads");
    NetworkConfig c;
    const NetDg dgs[3] = {{0.3, 0.05, 20.0, 50.0, -20.0, 20.0}, {0.22, 0.03, 40.0, 180.0, -20.0, 20.0}, {0.43, 0.04, 30.0, 160.0, -20.0, 20.0}};
    const double e_lo[3] = {40.0, 30.0, 50.0}, e_hi[3] = {160.0, 160.0, 180.0}, u_b[3] = {150.0, 125.0, 160.0};
    const double eff[3] = {0.95, 0.98, 0.95}, e0[3] = {100.0, 120.0, 140.0};
    for (int i = 0; i < 3; ++i) {
        MicrogridSpec m;
        m.dg = dgs[i];
        m.pg0 = m.dg.p_min;
        m.bess = {0.08, 0.08, e_lo[i], e_hi[i], -u_b[i], u_b[i], loss_from_efficiency(eff[i]), e0[i]};
        const double pk = peak_load[static_cast<std::size_t>(i)];
        m.cl = {0.33, 0.05, 0.0, 0.2 * pk, -0.05 * pk, 0.05 * pk};
        m.pcl0 = 0.0;
        c.mgs.push_back(m);
    }
    c.cems.bess.d = loss_from_efficiency(0.98);
    return c;
}

/// [EP, (E_B, P_G, P_CL, P_RES, P_L) per microgrid, E_B, P_G of the CEMS].
struct NetworkState {
    std::vector<double> v;

    static NetworkState zeros(int K) { return {std::vector<double>(static_cast<std::size_t>(state_dim(K)), 0.0)}; }
    int K() const { return (static_cast<int>(v.size()) - 3) / 5; }
    double& ep() { return v[0]; }
    double ep() const { return v[0]; }
    double& e(int i) { return v[static_cast<std::size_t>(1 + 5 * i)]; }
    double e(int i) const { return v[static_cast<std::size_t>(1 + 5 * i)]; }
    double& pg(int i) { return v[static_cast<std::size_t>(2 + 5 * i)]; }
    double pg(int i) const { return v[static_cast<std::size_t>(2 + 5 * i)]; }
    double& pcl(int i) { return v[static_cast<std::size_t>(3 + 5 * i)]; }
    double pcl(int i) const { return v[static_cast<std::size_t>(3 + 5 * i)]; }
    double& res(int i) { return v[static_cast<std::size_t>(4 + 5 * i)]; }
    double res(int i) const { return v[static_cast<std::size_t>(4 + 5 * i)]; }
    double& load(int i) { return v[static_cast<std::size_t>(5 + 5 * i)]; }
    double load(int i) const { return v[static_cast<std::size_t>(5 + 5 * i)]; }
    double& cems_e() { return v[v.size() - 2]; }
    double cems_e() const { return v[v.size() - 2]; }
    double& cems_pg() { return v[v.size() - 1]; }
    double cems_pg() const { return v[v.size() - 1]; }
    bool operator==(const NetworkState&) const = default;
};

/// [(u_PG, u_PB, u_CL) per microgrid, u_PG, u_PB of the CEMS].
struct ControlVector {
    std::vector<double> v;

    static ControlVector zeros(int K) { return {std::vector<double>(static_cast<std::size_t>(control_dim(K)), 0.0)}; }
    int K() const { return (static_cast<int>(v.size()) - 2) / 3; }
    double& pg(int i) { return v[static_cast<std::size_t>(3 * i)]; }
    double pg(int i) const { return v[static_cast<std::size_t>(3 * i)]; }
    double& pb(int i) { return v[static_cast<std::size_t>(3 * i + 1)]; }
    double pb(int i) const { return v[static_cast<std::size_t>(3 * i + 1)]; }
    double& cl(int i) { return v[static_cast<std::size_t>(3 * i + 2)]; }
    double cl(int i) const { return v[static_cast<std::size_t>(3 * i + 2)]; }
    double& cems_pg() { return v[v.size() - 2]; }
    double cems_pg() const { return v[v.size() - 2]; }
    double& cems_pb() { return v[v.size() - 1]; }
    double cems_pb() const { return v[v.size() - 1]; }
};

/// [W_EP, (W_RES, W_L) per microgrid].
struct ExogenousVector {
    std::vector<double> v;

    static ExogenousVector zeros(int K) { return {std::vector<double>(static_cast<std::size_t>(exogenous_dim(K)), 0.0)}; }
    int K() const { return (static_cast<int>(v.size()) - 1) / 2; }
    double& ep() { return v[0]; }
    double ep() const { return v[0]; }
    double& res(int i) { return v[static_cast<std::size_t>(1 + 2 * i)]; }
    double res(int i) const { return v[static_cast<std::size_t>(1 + 2 * i)]; }
    double& load(int i) { return v[static_cast<std::size_t>(2 + 2 * i)]; }
    double load(int i) const { return v[static_cast<std::size_t>(2 + 2 * i)]; }
};

namespace detail {

inline void check_dims(const NetworkConfig& cfg, const NetworkState& s)
{
    if (static_cast<int>(s.v.size()) != state_dim(cfg.K())) throw std::invalid_argument("network: state dimension mismatch");
}

inline void check_dims(const NetworkConfig& cfg, const NetworkState& s, const ControlVector& u)
{
    check_dims(cfg, s);
    if (static_cast<int>(u.v.size()) != control_dim(cfg.K())) throw std::invalid_argument("network: control dimension mismatch");
}

inline double bess_next(double e, double u, double dt, double d)
{
    const double moved = u * dt;
    return e - moved - d * std::abs(moved);
}

}  // namespace detail

/// P_L - P_CL - P_RES - P_G - u_PB; positive means importing from the network.
inline double exchange_power(int i, const NetworkState& s, const ControlVector& u)
{
    if (i < 0 || i >= s.K()) throw std::out_of_range("exchange_power: microgrid index out of range");
    return s.load(i) - s.pcl(i) - s.res(i) - s.pg(i) - u.pb(i);
}

/// Utility-grid import that closes the network balance.
inline double grid_power(const NetworkState& s, const ControlVector& u)
{
    double sum = 0.0;
    for (int i = 0; i < s.K(); ++i) sum += exchange_power(i, s, u);
    return sum - s.cems_pg() - u.cems_pb();
}

/// Cost contribution of microgrid i, including its doubled exchange charge.
inline double microgrid_cost(int i, const NetworkState& s, const ControlVector& u, const NetworkConfig& cfg)
{
    const auto& m = cfg.mgs[static_cast<std::size_t>(i)];
    const double bess = m.bess.gamma1 * std::abs(u.pb(i)) * cfg.delta_h + m.bess.gamma2 * s.e(i);
    const double dg = m.dg.a * s.pg(i) + m.dg.b;
    const double cl = m.cl.a + m.cl.b * s.pcl(i);
    return bess + dg + cl + 2.0 * s.ep() * exchange_power(i, s, u);
}

inline double cems_cost(const NetworkState& s, const ControlVector& u, const NetworkConfig& cfg)
{
    const auto& c = cfg.cems;
    const double bess = c.bess.gamma1 * std::abs(u.cems_pb()) * cfg.delta_h + c.bess.gamma2 * s.cems_e();
    const double dg = c.dg.a * s.cems_pg() + c.dg.b;
    return bess + dg - s.ep() * (s.cems_pg() + u.cems_pb());
}

/// Operating cost of every unit plus EP * (sum of exchanges + grid import).
inline double step_cost(const NetworkState& s, const ControlVector& u, const NetworkConfig& cfg)
{
    detail::check_dims(cfg, s, u);
    double c = cems_cost(s, u, cfg);
    for (int i = 0; i < cfg.K(); ++i) c += microgrid_cost(i, s, u, cfg);
    return c;
}

/// Description of the first violated constraint, if any.
inline std::optional<std::string> control_violation(const NetworkState& s, const ControlVector& u, const NetworkConfig& cfg, double tol = 1e-9)
{
    detail::check_dims(cfg, s, u);
    auto in = [&](double x, double lo, double hi) { return x >= lo - tol * std::max(1.0, std::abs(lo)) && x <= hi + tol * std::max(1.0, std::abs(hi)); };
    const double dt = cfg.delta_h;
    for (int i = 0; i < cfg.K(); ++i) {
        const auto& m = cfg.mgs[static_cast<std::size_t>(i)];
        const std::string w = "mg" + std::to_string(i + 1);
        if (!in(u.pg(i), m.dg.u_min, m.dg.u_max)) return w + ": dg ramp out of range";
        if (!in(s.pg(i) + u.pg(i), m.dg.p_min, m.dg.p_max)) return w + ": dg output out of range";
        if (!in(u.pb(i), m.bess.u_min, m.bess.u_max)) return w + ": bess power out of range";
        if (!in(detail::bess_next(s.e(i), u.pb(i), dt, m.bess.d), m.bess.e_min, m.bess.e_max)) return w + ": bess energy out of range";
        if (!in(u.cl(i), m.cl.u_min, m.cl.u_max)) return w + ": cl ramp out of range";
        if (!in(s.pcl(i) + u.cl(i), m.cl.p_min, m.cl.p_max)) return w + ": cl power out of range";
        if (!in(exchange_power(i, s, u), m.exc_min, m.exc_max)) return w + ": exchange out of range";
    }
    const auto& c = cfg.cems;
    if (!in(u.cems_pg(), c.dg.u_min, c.dg.u_max)) return std::string("cems: dg ramp out of range");
    if (!in(s.cems_pg() + u.cems_pg(), c.dg.p_min, c.dg.p_max)) return std::string("cems: dg output out of range");
    if (!in(u.cems_pb(), c.bess.u_min, c.bess.u_max)) return std::string("cems: bess power out of range");
    if (!in(detail::bess_next(s.cems_e(), u.cems_pb(), dt, c.bess.d), c.bess.e_min, c.bess.e_max)) return std::string("cems: bess energy out of range");
    return std::nullopt;
}

/// Deterministic part of the transition: unit dynamics only.
inline NetworkState post_decision(const NetworkState& s, const ControlVector& u, const NetworkConfig& cfg)
{
    if (auto why = control_violation(s, u, cfg)) throw InfeasibleError("post_decision: " + *why);
    NetworkState p = s;
    for (int i = 0; i < cfg.K(); ++i) {
        const auto& m = cfg.mgs[static_cast<std::size_t>(i)];
        p.e(i) = detail::bess_next(s.e(i), u.pb(i), cfg.delta_h, m.bess.d);
        p.pg(i) = s.pg(i) + u.pg(i);
        p.pcl(i) = s.pcl(i) + u.cl(i);
    }
    p.cems_e() = detail::bess_next(s.cems_e(), u.cems_pb(), cfg.delta_h, cfg.cems.bess.d);
    p.cems_pg() = s.cems_pg() + u.cems_pg();
    return p;
}

/// Adds the exogenous increments to price, renewable power and load.
inline NetworkState apply_exogenous(const NetworkState& post, const ExogenousVector& w)
{
    if (w.K() != post.K() || static_cast<int>(w.v.size()) != exogenous_dim(post.K()))
        throw std::invalid_argument("apply_exogenous: exogenous dimension mismatch");
    NetworkState s = post;
    s.ep() += w.ep();
    for (int i = 0; i < post.K(); ++i) {
        s.res(i) += w.res(i);
        s.load(i) += w.load(i);
    }
    return s;
}

inline NetworkState transition(const NetworkState& s, const ControlVector& u, const ExogenousVector& w, const NetworkConfig& cfg)
{
    return apply_exogenous(post_decision(s, u, cfg), w);
}

/// Price and per-microgrid renewable/load values for each stage.
struct NetworkPath {
    std::vector<double> ep;
    std::vector<std::vector<double>> res;
    std::vector<std::vector<double>> load;

    std::size_t length() const { return ep.size(); }
    void validate(int K, std::size_t need) const
    {
        if (static_cast<int>(res.size()) != K || static_cast<int>(load.size()) != K)
            throw std::invalid_argument("network path: need one renewable and one load series per microgrid");
        if (ep.size() < need) throw std::out_of_range("network path: price series shorter than the horizon");
        for (int i = 0; i < K; ++i)
            if (res[static_cast<std::size_t>(i)].size() < need || load[static_cast<std::size_t>(i)].size() < need)
                throw std::out_of_range("network path: microgrid series shorter than the horizon");
    }
};

inline NetworkState initial_state(const NetworkConfig& cfg, const NetworkPath& path, std::size_t t0 = 0)
{
    path.validate(cfg.K(), t0 + 1);
    auto s = NetworkState::zeros(cfg.K());
    s.ep() = path.ep[t0];
    for (int i = 0; i < cfg.K(); ++i) {
        const auto& m = cfg.mgs[static_cast<std::size_t>(i)];
        s.e(i) = m.bess.e0;
        s.pg(i) = m.pg0;
        s.pcl(i) = m.pcl0;
        s.res(i) = path.res[static_cast<std::size_t>(i)][t0];
        s.load(i) = path.load[static_cast<std::size_t>(i)][t0];
    }
    s.cems_e() = cfg.cems.bess.e0;
    s.cems_pg() = cfg.cems.pg0;
    return s;
}

/// Increments carrying stage t's exogenous values to stage t + 1.
inline ExogenousVector path_increment(const NetworkPath& path, std::size_t t)
{
    const int K = static_cast<int>(path.res.size());
    auto w = ExogenousVector::zeros(K);
    w.ep() = path.ep[t + 1] - path.ep[t];
    for (int i = 0; i < K; ++i) {
        const auto& r = path.res[static_cast<std::size_t>(i)];
        const auto& l = path.load[static_cast<std::size_t>(i)];
        w.res(i) = r[t + 1] - r[t];
        w.load(i) = l[t + 1] - l[t];
    }
    return w;
}

}  // namespace mgopt
