#pragma once

// Brute-force reference solvers. Each one recomputes costs from first
// principles and enumerates every admissible path, so it shares no search
// code with the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "mgopt/adp_dispatch.hpp"
#include "mgopt/dg_scheduler.hpp"
#include "mgopt/dp_dispatch.hpp"
#include "mgopt/network_adp.hpp"
#include "mgopt/smoothing.hpp"

namespace oracle {

inline constexpr double inf = std::numeric_limits<double>::infinity();

/// Turning points of a trajectory with flat runs removed; endpoints included.
inline std::vector<double> turning_points(const std::vector<double>& e)
{
    std::vector<double> v;
    for (double x : e)
        if (v.empty() || x != v.back()) v.push_back(x);
    if (v.size() <= 2) return v;
    std::vector<double> ext{v.front()};
    for (std::size_t k = 1; k + 1 < v.size(); ++k)
        if ((v[k] - v[k - 1]) * (v[k + 1] - v[k]) < 0.0) ext.push_back(v[k]);
    ext.push_back(v.back());
    return ext;
}

inline double cycle_cost(const std::vector<double>& e, double e_max, double n100, double kp, double rc)
{
    const auto ext = turning_points(e);
    double c = 0.0;
    for (std::size_t i = 1; i < ext.size(); ++i) c += 0.5 * rc / n100 * std::pow(std::abs(ext[i] - ext[i - 1]) / e_max, kp);
    return c;
}

/// Power that moves the store from e to e2 under E' = E - P dt - d|P dt|.
inline double power(double e, double e2, double dt, double d)
{
    if (e2 <= e) return (e - e2) / (dt * (1.0 + d));
    return -(e2 - e) / (dt * (1.0 - d));
}

inline std::vector<double> linspace(double lo, double hi, int n)
{
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    g.back() = hi;
    return g;
}

/// Calls f on every length-N index sequence over G values.
inline void for_each_path(int N, int G, const std::function<void(const std::vector<int>&)>& f)
{
    std::vector<int> idx(static_cast<std::size_t>(N), 0);
    while (true) {
        f(idx);
        int k = N - 1;
        while (k >= 0 && ++idx[static_cast<std::size_t>(k)] == G) idx[static_cast<std::size_t>(k--)] = 0;
        if (k < 0) return;
    }
}

inline double dispatch(const mgopt::DispatchScenario& sc, double e0, std::size_t k0)
{
    const auto& b = sc.battery;
    const auto grid = linspace(b.e_min, b.e_cap_max, sc.grid_points);
    const int N = sc.horizon_steps;
    const double slack = 1e-9 * std::max(b.p_charge_max, b.p_discharge_max);
    double best = inf;
    for_each_path(N, sc.grid_points, [&](const std::vector<int>& idx) {
        std::vector<double> e{e0};
        double trade = 0.0;
        for (int k = 0; k < N; ++k) {
            const double nx = grid[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
            const double p = power(e.back(), nx, b.delta_t, b.d_loss);
            if (p > b.p_discharge_max + slack || p < -b.p_charge_max - slack) return;
            const std::size_t t = k0 + static_cast<std::size_t>(k);
            const double pg = sc.renewable[t] - sc.load[t] + b.n_parallel * p;
            trade += -sc.price[t] * pg / 1000.0;
            e.push_back(nx);
        }
        const double c = trade + b.n_parallel * cycle_cost(e, b.e_max, sc.cycle.n_fail_100, sc.cycle.kp, sc.cycle.r_c);
        best = std::min(best, c);
    });
    return best;
}

/// Cheapest feasible DG output and curtailment for a fixed storage action,
/// found by comparing every candidate stationary point of the piecewise
/// convex cost a P^2 + b P + c + c_cur * max(0, P - hi_allow).
inline double dg_stage(double p_b, double demand, double p_s, const mgopt::SchedulerParams& sp)
{
    const auto& g = sp.dg;
    const double lo = std::max(g.p_min, demand - p_s - p_b);
    const double hi = g.p_max;
    if (lo > hi + 1e-9 * std::max(1.0, hi)) return inf;
    const double kink = sp.eps_tolerance * demand - p_s - p_b;
    auto f = [&](double P) { return g.a * P * P + g.b * P + g.c + sp.c_cur * std::max(0.0, P - kink); };
    std::vector<double> cand{lo, hi, kink};
    if (g.a > 0.0) {
        cand.push_back(-g.b / (2.0 * g.a));
        cand.push_back(-(g.b + sp.c_cur) / (2.0 * g.a));
    }
    double best = inf;
    for (double P : cand) best = std::min(best, f(std::clamp(P, lo, std::max(lo, hi))));
    return best;
}

inline double schedule(const std::vector<double>& solar, const std::vector<double>& demand, const mgopt::SchedulerParams& sp, double x0, int N)
{
    const auto& bb = sp.bess;
    const auto grid = linspace(bb.x_min, bb.x_max, sp.grid_points);
    const double slack = 1e-9 * std::max({1.0, std::abs(bb.p_min), std::abs(bb.p_max)});
    double best = inf;
    for_each_path(N, sp.grid_points, [&](const std::vector<int>& idx) {
        double x = x0, c = 0.0;
        for (int k = 0; k < N; ++k) {
            const double nx = grid[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
            const double p = power(x, nx, bb.delta_t, bb.d_loss);
            if (p < bb.p_min - slack || p > bb.p_max + slack) return;
            const double dg = dg_stage(p, demand[static_cast<std::size_t>(k)], solar[static_cast<std::size_t>(k)], sp);
            if (!std::isfinite(dg)) return;
            c += dg + bb.gamma1 * std::abs(p * bb.delta_t) + bb.gamma2 * x;
            x = nx;
        }
        best = std::min(best, c);
    });
    return best;
}

inline double smoothing(const std::vector<double>& pw, const mgopt::SmoothingParams& sm, const mgopt::BatterySpec& b, double e0, double pg_prev)
{
    const int N = static_cast<int>(pw.size());
    const auto grid = linspace(b.e_min, b.e_cap_max, sm.grid_points);
    const double pslack = 1e-9 * std::max({1.0, b.p_charge_max, b.p_discharge_max});
    const double rslack = 1e-9 * std::max({1.0, -sm.rr_min, sm.rr_max});
    double best = inf;
    for_each_path(N, sm.grid_points, [&](const std::vector<int>& idx) {
        double x = e0, prev = pg_prev, c = 0.0;
        for (int t = 0; t < N; ++t) {
            const double nx = grid[static_cast<std::size_t>(idx[static_cast<std::size_t>(t)])];
            const double p = power(x, nx, b.delta_t, b.d_loss);
            if (p > b.p_discharge_max + pslack || p < -b.p_charge_max - pslack) return;
            const double pg = p + pw[static_cast<std::size_t>(t)];
            if (pg < -1e-9 * std::max(1.0, std::abs(pw[static_cast<std::size_t>(t)]))) return;
            if (pg - prev < sm.rr_min - rslack || pg - prev > sm.rr_max + rslack) return;
            c += sm.gamma_b * std::abs(p * b.delta_t) + sm.gamma_b * x;
            prev = pg;
            x = nx;
        }
        best = std::min(best, c);
    });
    return best;
}

/// Stage-I setpoint QP by enumerating which bound (lower, upper, none) each
/// setpoint sits on and solving the remaining least-squares problem exactly.
/// The objective is ||A D - r||^2 with y_t = w_t - c (T_t - D_t).
struct QpResult {
    std::vector<double> setpoints;
    double objective = inf;
};

inline QpResult setpoint_qp(const std::vector<double>& wind, const std::vector<double>& t_out, double c, double band_low, double band_high)
{
    const int N = static_cast<int>(wind.size());
    std::vector<double> lo(N), hi(N);
    for (int t = 0; t < N; ++t) {
        lo[t] = band_low;
        hi[t] = std::min(band_high, t_out[t]);
    }
    // rows t = 1..N-1: y_t - y_{t-1} = (w_t - c T_t) - (w_{t-1} - c T_{t-1}) + c (D_t - D_{t-1})
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N - 1, N);
    Eigen::VectorXd r(N - 1);
    for (int t = 1; t < N; ++t) {
        A(t - 1, t) = c;
        A(t - 1, t - 1) = -c;
        r(t - 1) = -((wind[t] - c * t_out[t]) - (wind[t - 1] - c * t_out[t - 1]));
    }
    QpResult best;
    std::vector<int> face(static_cast<std::size_t>(N), 0);
    for_each_path(N, 3, [&](const std::vector<int>& f) {
        Eigen::VectorXd D(N);
        std::vector<int> free;
        for (int t = 0; t < N; ++t) {
            if (f[t] == 0) D(t) = lo[t];
            else if (f[t] == 1) D(t) = hi[t];
            else {
                D(t) = 0.0;
                free.push_back(t);
            }
        }
        if (!free.empty()) {
            Eigen::MatrixXd Af(N - 1, static_cast<Eigen::Index>(free.size()));
            for (std::size_t j = 0; j < free.size(); ++j) Af.col(static_cast<Eigen::Index>(j)) = A.col(free[j]);
            const Eigen::VectorXd rhs = r - A * D;
            const Eigen::VectorXd z = Af.completeOrthogonalDecomposition().solve(rhs);
            for (std::size_t j = 0; j < free.size(); ++j) {
                const double v = z(static_cast<Eigen::Index>(j));
                const int t = free[j];
                if (v < lo[t] - 1e-9 || v > hi[t] + 1e-9) return;
                D(t) = std::clamp(v, lo[t], hi[t]);
            }
        }
        const double obj = (A * D - r).squaredNorm();
        if (obj < best.objective) {
            best.objective = obj;
            best.setpoints.assign(D.data(), D.data() + N);
        }
    });
    return best;
}

/// Exhaustive search over the network control lattice.
inline double network(const mgopt::NetworkConfig& cfg, const mgopt::NetworkPath& path, const mgopt::NetworkState& s, int t, int levels)
{
    using namespace mgopt;
    if (t == cfg.horizon) return 0.0;
    const int K = cfg.K();
    const auto L = control_lattice(s, cfg, levels);
    double best = inf;
    auto u = ControlVector::zeros(K);
    std::function<void(int)> rec = [&](int i) {
        if (i == K) {
            for (double a : L.cems_pg)
                for (double b : L.cems_pb) {
                    u.cems_pg() = a;
                    u.cems_pb() = b;
                    if (control_violation(s, u, cfg)) continue;
                    const double sc = step_cost(s, u, cfg);
                    const NetworkState post = post_decision(s, u, cfg);
                    const double rest = t + 1 < cfg.horizon ? network(cfg, path, apply_exogenous(post, path_increment(path, static_cast<std::size_t>(t))), t + 1, levels) : 0.0;
                    best = std::min(best, sc + rest);
                }
            return;
        }
        for (double a : L.pg[static_cast<std::size_t>(i)])
            for (double b : L.pb[static_cast<std::size_t>(i)])
                for (double c : L.cl[static_cast<std::size_t>(i)]) {
                    u.pg(i) = a;
                    u.pb(i) = b;
                    u.cl(i) = c;
                    rec(i + 1);
                }
    };
    rec(0);
    return best;
}

/// Backward induction over the storage lattice for one deterministic horizon.
/// Returns the best achievable reward from the state index x0i.
inline double adp_exact(const mgopt::AdpHorizon& hz, const mgopt::AdpDispatchConfig& cfg, int x0i)
{
    using namespace mgopt;
    const int S = cfg.states(), N = static_cast<int>(hz.wind_wh.size());
    std::vector<double> V(static_cast<std::size_t>(S));
    for (int i = 0; i < S; ++i) V[static_cast<std::size_t>(i)] = remaining_energy_value(cfg.state(i), 0.0, hz.m_rm, cfg);
    for (int k = N - 1; k >= 0; --k) {
        std::vector<double> W(static_cast<std::size_t>(S), -inf);
        for (int i = 0; i < S; ++i) {
            const double x = cfg.state(i);
            const int dmax = cfg.max_discharge_steps(), cmax = cfg.max_charge_steps();
            for (int s = -dmax; s <= cmax; ++s) {
                const int j = i + s;
                if (j < 0 || j >= S) continue;
                const double u = s * cfg.state_step;
                if (u > hz.wind_wh[static_cast<std::size_t>(k)] + 1e-9) continue;  // charging only from wind
                const double g = hz.wind_wh[static_cast<std::size_t>(k)] - u;
                double opr = 0.0;
                if (u < 0.0) opr = throughput_operational_cost(discharge_event(x, u, cfg), cfg.life);
                const double reward = hz.price[static_cast<std::size_t>(k)] * g * 1e-6 - opr;
                W[static_cast<std::size_t>(i)] = std::max(W[static_cast<std::size_t>(i)], reward + V[static_cast<std::size_t>(j)]);
            }
        }
        V = W;
    }
    return V[static_cast<std::size_t>(x0i)];
}

}  // namespace oracle
