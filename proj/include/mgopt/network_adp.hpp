#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mgopt/common.hpp"
#include "mgopt/network.hpp"

namespace mgopt {

inline int feature_dim(int K) { return 13 * K + 8; }

/// Divisors applied to raw quantities before they enter the feature vector.
struct FeatureScales {
    double price = 0.1;
    double power = 500.0;
};

namespace detail {

/// Scale for each state component.
inline std::vector<double> state_scales(const NetworkConfig& cfg, const FeatureScales& fs)
{
    std::vector<double> sc(static_cast<std::size_t>(state_dim(cfg.K())));
    sc[0] = fs.price;
    for (int i = 0; i < cfg.K(); ++i) {
        const auto& m = cfg.mgs[static_cast<std::size_t>(i)];
        const auto b = static_cast<std::size_t>(1 + 5 * i);
        sc[b] = std::max(1.0, m.bess.e_max);
        sc[b + 1] = std::max(1.0, m.dg.p_max);
        sc[b + 2] = std::max(1.0, m.cl.p_max);
        sc[b + 3] = fs.power;
        sc[b + 4] = fs.power;
    }
    sc[sc.size() - 2] = std::max(1.0, cfg.cems.bess.e_max);
    sc[sc.size() - 1] = std::max(1.0, cfg.cems.dg.p_max);
    return sc;
}

/// State indices of the controlled quantities (E_B, P_G, P_CL per microgrid, E_B, P_G of the CEMS).
inline std::vector<int> controlled_indices(int K)
{
    std::vector<int> idx;
    for (int i = 0; i < K; ++i) {
        idx.push_back(1 + 5 * i);
        idx.push_back(2 + 5 * i);
        idx.push_back(3 + 5 * i);
    }
    idx.push_back(5 * K + 1);
    idx.push_back(5 * K + 2);
    return idx;
}

}  // namespace detail

/// Basis functions of a post-decision state: all state variables, the
/// controlled variables, price times the controlled variables, price times
/// renewable and load power, and a constant.
inline Eigen::VectorXd features(const NetworkState& post, const NetworkConfig& cfg, const FeatureScales& fs = {})
{
    detail::check_dims(cfg, post);
    const int K = cfg.K();
    const auto sc = detail::state_scales(cfg, fs);
    const auto ctl = detail::controlled_indices(K);
    Eigen::VectorXd phi(feature_dim(K));
    int f = 0;
    for (std::size_t j = 0; j < post.v.size(); ++j) phi[f++] = post.v[j] / sc[j];
    for (int j : ctl) phi[f++] = post.v[static_cast<std::size_t>(j)] / sc[static_cast<std::size_t>(j)];
    const double ep = post.ep() / fs.price;
    for (int j : ctl) phi[f++] = ep * post.v[static_cast<std::size_t>(j)] / sc[static_cast<std::size_t>(j)];
    for (int i = 0; i < K; ++i) {
        phi[f++] = ep * post.res(i) / fs.power;
        phi[f++] = ep * post.load(i) / fs.power;
    }
    phi[f++] = 1.0;
    return phi;
}

/// Linear value approximation theta^T phi with its recursive least squares state.
struct ValueFunctionApprox {
    Eigen::VectorXd theta;
    Eigen::MatrixXd B;
    double lambda = 1.0;

    static ValueFunctionApprox make(int dim, double b0 = 1000.0, double lambda = 1.0)
    {
        if (dim < 1) throw std::invalid_argument("ValueFunctionApprox: dimension must be >= 1");
        if (!(b0 > 0.0)) throw std::invalid_argument("ValueFunctionApprox: b0 must be positive");
        if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("ValueFunctionApprox: lambda must lie in (0, 1]");
        return {Eigen::VectorXd::Zero(dim), b0 * Eigen::MatrixXd::Identity(dim, dim), lambda};
    }

    double value(const Eigen::VectorXd& phi) const { return theta.dot(phi); }
};

/// One recursive least squares step towards observation v_hat.
inline void rls_update(ValueFunctionApprox& vfa, const Eigen::VectorXd& phi, double v_hat)
{
    if (phi.size() != vfa.theta.size()) throw std::invalid_argument("rls_update: feature dimension mismatch");
    const Eigen::VectorXd b = vfa.B * phi;
    const double gamma = vfa.lambda + phi.dot(b);
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw NumericalError("rls_update: non-positive gamma");
    const double err = vfa.theta.dot(phi) - v_hat;
    vfa.theta -= b * (err / gamma);
    vfa.B -= (b * b.transpose()) / gamma;
    vfa.B /= vfa.lambda;
    if (!vfa.theta.allFinite()) throw NumericalError("rls_update: parameter vector diverged");
}

/// Candidate values for one control: `levels` evenly spaced points over the
/// feasible interval, plus 0 when it is feasible.
inline std::vector<double> control_levels(double lo, double hi, int levels)
{
    const double tol = 1e-9 * std::max({1.0, std::abs(lo), std::abs(hi)});
    if (lo > hi + tol) throw InfeasibleError("control_levels: empty feasible interval");
    if (levels < 1) throw std::invalid_argument("control_levels: levels must be >= 1");
    hi = std::max(lo, hi);
    std::vector<double> out;
    if (levels == 1 || hi - lo <= tol) {
        out.push_back(lo);
    } else {
        for (int k = 0; k < levels; ++k) out.push_back(k + 1 == levels ? hi : lo + (hi - lo) * k / (levels - 1));
    }
    if (lo <= 0.0 && 0.0 <= hi && std::none_of(out.begin(), out.end(), [](double x) { return x == 0.0; })) {
        out.push_back(0.0);
        std::sort(out.begin(), out.end());
    }
    return out;
}

namespace detail {

inline std::pair<double, double> bess_interval(double e, const NetBess& b, double dt)
{
    const double up = std::max(0.0, e - b.e_min) / (dt * (1.0 + b.d));
    const double down = std::max(0.0, b.e_max - e) / (dt * (1.0 - b.d));
    return {std::max(b.u_min, -down), std::min(b.u_max, up)};
}

inline std::pair<double, double> ramp_interval(double p, double p_min, double p_max, double u_min, double u_max)
{
    return {std::max(u_min, p_min - p), std::min(u_max, p_max - p)};
}

inline bool better_control(double c, double best, double l1, double best_l1)
{
    if (nearly_equal(c, best)) return l1 < best_l1;
    return c < best;
}

}  // namespace detail

/// Per-microgrid candidate sets at state s.
struct ControlLattice {
    std::vector<std::vector<double>> pg, pb, cl;  ///< per microgrid
    std::vector<double> cems_pg, cems_pb;
};

inline ControlLattice control_lattice(const NetworkState& s, const NetworkConfig& cfg, int levels)
{
    detail::check_dims(cfg, s);
    ControlLattice L;
    const double dt = cfg.delta_h;
    for (int i = 0; i < cfg.K(); ++i) {
        const auto& m = cfg.mgs[static_cast<std::size_t>(i)];
        auto [g0, g1] = detail::ramp_interval(s.pg(i), m.dg.p_min, m.dg.p_max, m.dg.u_min, m.dg.u_max);
        auto [c0, c1] = detail::ramp_interval(s.pcl(i), m.cl.p_min, m.cl.p_max, m.cl.u_min, m.cl.u_max);
        auto [b0, b1] = detail::bess_interval(s.e(i), m.bess, dt);
        const double base = s.load(i) - s.pcl(i) - s.res(i) - s.pg(i);
        b0 = std::max(b0, base - m.exc_max);
        b1 = std::min(b1, base - m.exc_min);
        L.pg.push_back(control_levels(g0, g1, levels));
        L.pb.push_back(control_levels(b0, b1, levels));
        L.cl.push_back(control_levels(c0, c1, levels));
    }
    const auto& c = cfg.cems;
    auto [g0, g1] = detail::ramp_interval(s.cems_pg(), c.dg.p_min, c.dg.p_max, c.dg.u_min, c.dg.u_max);
    auto [b0, b1] = detail::bess_interval(s.cems_e(), c.bess, dt);
    L.cems_pg = control_levels(g0, g1, levels);
    L.cems_pb = control_levels(b0, b1, levels);
    return L;
}

struct GreedyDecision {
    ControlVector u;
    NetworkState post;
    double stage_cost = 0.0;
    double v_hat = 0.0;  ///< stage cost plus approximate post-decision value
};

/// argmin_u C(s, u) + V(post(s, u)). With a linear value approximation the
/// objective separates by microgrid once the grid import absorbs the
/// balance, so each unit group is enumerated on its own lattice.
inline GreedyDecision greedy_action(const NetworkState& s, const ValueFunctionApprox* vfa, const NetworkConfig& cfg, int levels,
                                    const FeatureScales& fs = {})
{
    const int K = cfg.K();
    const ControlLattice lat = control_lattice(s, cfg, levels);

    std::vector<double> w(static_cast<std::size_t>(state_dim(K)), 0.0);
    if (vfa) {
        if (vfa->theta.size() != feature_dim(K)) throw std::invalid_argument("greedy_action: value approximation dimension mismatch");
        const auto sc = detail::state_scales(cfg, fs);
        const auto ctl = detail::controlled_indices(K);
        const int n_state = state_dim(K), n_ctl = control_dim(K);
        const double ep = s.ep() / fs.price;
        for (std::size_t c = 0; c < ctl.size(); ++c) {
            const auto j = static_cast<std::size_t>(ctl[c]);
            const double th = vfa->theta[static_cast<Eigen::Index>(j)] + vfa->theta[n_state + static_cast<Eigen::Index>(c)] +
                              ep * vfa->theta[n_state + n_ctl + static_cast<Eigen::Index>(c)];
            w[j] = th / sc[j];
        }
    }
    const double dt = cfg.delta_h;
    auto u = ControlVector::zeros(K);
    for (int i = 0; i < K; ++i) {
        const auto& m = cfg.mgs[static_cast<std::size_t>(i)];
        const auto b = static_cast<std::size_t>(1 + 5 * i);
        double best = kInf, best_l1 = kInf;
        double bg = 0.0, bb = 0.0, bc = 0.0;
        for (double ub : lat.pb[static_cast<std::size_t>(i)]) {
            const double e_next = detail::bess_next(s.e(i), ub, dt, m.bess.d);
            const double exc = s.load(i) - s.pcl(i) - s.res(i) - s.pg(i) - ub;
            const double base = m.bess.gamma1 * std::abs(ub) * dt + 2.0 * s.ep() * exc + w[b] * e_next;
            for (double ug : lat.pg[static_cast<std::size_t>(i)])
                for (double uc : lat.cl[static_cast<std::size_t>(i)]) {
                    const double c = base + w[b + 1] * (s.pg(i) + ug) + w[b + 2] * (s.pcl(i) + uc);
                    const double l1 = std::abs(ub) + std::abs(ug) + std::abs(uc);
                    if (detail::better_control(c, best, l1, best_l1)) {
                        best = c;
                        best_l1 = l1;
                        bg = ug;
                        bb = ub;
                        bc = uc;
                    }
                }
        }
        u.pg(i) = bg;
        u.pb(i) = bb;
        u.cl(i) = bc;
    }
    {
        const auto& c = cfg.cems;
        const std::size_t je = w.size() - 2, jg = w.size() - 1;
        double best = kInf, best_l1 = kInf;
        double bg = 0.0, bb = 0.0;
        for (double ub : lat.cems_pb) {
            const double e_next = detail::bess_next(s.cems_e(), ub, dt, c.bess.d);
            const double base = c.bess.gamma1 * std::abs(ub) * dt - s.ep() * ub + w[je] * e_next;
            for (double ug : lat.cems_pg) {
                const double v = base + w[jg] * (s.cems_pg() + ug);
                const double l1 = std::abs(ub) + std::abs(ug);
                if (detail::better_control(v, best, l1, best_l1)) {
                    best = v;
                    best_l1 = l1;
                    bg = ug;
                    bb = ub;
                }
            }
        }
        u.cems_pg() = bg;
        u.cems_pb() = bb;
    }
    GreedyDecision d;
    d.post = post_decision(s, u, cfg);
    d.stage_cost = step_cost(s, u, cfg);
    d.v_hat = d.stage_cost + (vfa ? vfa->value(features(d.post, cfg, fs)) : 0.0);
    d.u = std::move(u);
    return d;
}

struct NetworkAdpParams {
    int iterations = 200;
    int levels = 5;
    double eps = 10.0;
    double beta = 0.6;
    double lambda = 1.0;
    double b0 = 1000.0;
    double sample_sigma_fraction = 0.05;
    double exploration = 0.3;  ///< probability of a random lattice control during training
    FeatureScales scales;

    std::vector<std::string> diagnostics() const
    {
        std::vector<std::string> out;
        if (iterations < 1) out.push_back("network adp: iterations must be >= 1");
        if (levels < 2) out.push_back("network adp: levels must be >= 2");
        if (!(eps > 0.0 && beta > 0.0)) out.push_back("network adp: eps and beta must be positive");
        if (!(lambda > 0.0 && lambda <= 1.0)) out.push_back("network adp: lambda must lie in (0, 1]");
        if (!(b0 > 0.0)) out.push_back("network adp: b0 must be positive");
        if (!(exploration >= 0.0 && exploration <= 1.0)) out.push_back("network adp: exploration must lie in [0, 1]");
        if (!(sample_sigma_fraction >= 0.0)) out.push_back("network adp: sample_sigma_fraction must be non-negative");
        if (!(scales.price > 0.0 && scales.power > 0.0)) out.push_back("network adp: feature scales must be positive");
        return out;
    }

    void validate() const
    {
        const auto d = diagnostics();
        if (!d.empty()) throw std::invalid_argument(d.front());
    }
};

/// Sample path around a point forecast: independent Gaussian deviations with
/// standard deviation fraction * mean|x| at every stage after the first.
/// Powers are clamped at zero; prices are not.
inline NetworkPath sample_network_path(const NetworkPath& forecast, std::size_t N, double fraction, std::uint64_t seed)
{
    const int K = static_cast<int>(forecast.res.size());
    forecast.validate(K, N);
    NetworkPath p;
    p.ep.assign(forecast.ep.begin(), forecast.ep.begin() + static_cast<std::ptrdiff_t>(N));
    for (int i = 0; i < K; ++i) {
        const auto& r = forecast.res[static_cast<std::size_t>(i)];
        const auto& l = forecast.load[static_cast<std::size_t>(i)];
        p.res.emplace_back(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(N));
        p.load.emplace_back(l.begin(), l.begin() + static_cast<std::ptrdiff_t>(N));
    }
    if (fraction == 0.0) return p;
    GaussianSource g(seed);
    auto perturb = [&](std::vector<double>& x, bool clamp) {
        double m = 0.0;
        for (double v : x) m += std::abs(v);
        const double sd = fraction * m / static_cast<double>(x.size());
        for (std::size_t t = 1; t < x.size(); ++t) {
            x[t] += sd * g.normal();
            if (clamp) x[t] = std::max(0.0, x[t]);
        }
    };
    perturb(p.ep, false);
    for (int i = 0; i < K; ++i) {
        perturb(p.res[static_cast<std::size_t>(i)], true);
        perturb(p.load[static_cast<std::size_t>(i)], true);
    }
    return p;
}

/// Uniform draw from each control's candidate set.
inline ControlVector random_control(const ControlLattice& lat, GaussianSource& g)
{
    const int K = static_cast<int>(lat.pg.size());
    auto pick = [&](const std::vector<double>& xs) {
        const auto k = static_cast<std::size_t>(g.uniform() * static_cast<double>(xs.size()));
        return xs[std::min(k, xs.size() - 1)];
    };
    auto u = ControlVector::zeros(K);
    for (int i = 0; i < K; ++i) {
        u.pg(i) = pick(lat.pg[static_cast<std::size_t>(i)]);
        u.pb(i) = pick(lat.pb[static_cast<std::size_t>(i)]);
        u.cl(i) = pick(lat.cl[static_cast<std::size_t>(i)]);
    }
    u.cems_pg() = pick(lat.cems_pg);
    u.cems_pb() = pick(lat.cems_pb);
    return u;
}

struct NetworkTraining {
    std::vector<ValueFunctionApprox> vfa;  ///< one per stage; the last stays zero
    std::vector<double> cost_trace;        ///< realised cost of each forward pass
};

/// Forward passes over sampled paths; each stage's observation refines the
/// previous stage's post-decision value.
inline NetworkTraining network_adp_train(const NetworkConfig& cfg, const NetworkPath& forecast, const NetworkAdpParams& prm, std::uint64_t seed)
{
    cfg.validate();
    prm.validate();
    const int N = cfg.horizon;
    const int K = cfg.K();
    forecast.validate(K, static_cast<std::size_t>(N));
    NetworkTraining tr;
    tr.vfa.assign(static_cast<std::size_t>(N), ValueFunctionApprox::make(feature_dim(K), prm.b0, prm.lambda));
    for (int n = 1; n <= prm.iterations; ++n) {
        const NetworkPath path = sample_network_path(forecast, static_cast<std::size_t>(N), prm.sample_sigma_fraction, derive_seed(seed, static_cast<std::uint64_t>(n)));
        const double a = harmonic_stepsize(n, prm.eps, prm.beta);
        GaussianSource explore(derive_seed(seed, 1'000'000 + static_cast<std::uint64_t>(n)));
        NetworkState s = initial_state(cfg, path);
        Eigen::VectorXd phi_prev;
        double total = 0.0;
        for (int t = 0; t < N; ++t) {
            const auto& v = tr.vfa[static_cast<std::size_t>(t)];
            GreedyDecision d = greedy_action(s, t + 1 < N ? &v : nullptr, cfg, prm.levels, prm.scales);
            if (t > 0) {
                auto& prev = tr.vfa[static_cast<std::size_t>(t - 1)];
                const double target = (1.0 - a) * prev.value(phi_prev) + a * d.v_hat;
                rls_update(prev, phi_prev, target);
            }
            if (prm.exploration > 0.0 && explore.uniform() < prm.exploration) {
                // the observation above stays the greedy one; only the visited state changes
                d.u = random_control(control_lattice(s, cfg, prm.levels), explore);
                d.post = post_decision(s, d.u, cfg);
                d.stage_cost = step_cost(s, d.u, cfg);
            }
            total += d.stage_cost;
            phi_prev = features(d.post, cfg, prm.scales);
            if (t + 1 < N) s = apply_exogenous(d.post, path_increment(path, static_cast<std::size_t>(t)));
        }
        tr.cost_trace.push_back(total);
    }
    return tr;
}

struct NetworkEvaluation {
    std::vector<NetworkState> states;
    std::vector<ControlVector> controls;
    std::vector<double> stage_cost;
    std::vector<std::vector<double>> exchange;  ///< [stage][microgrid]
    std::vector<double> p_ug;
    std::vector<double> ep;
    double total = 0.0;
};

/// Runs the greedy policy along a path; without value approximations this is
/// the myopic baseline.
inline NetworkEvaluation network_evaluate(const NetworkConfig& cfg, const NetworkPath& path, const std::vector<ValueFunctionApprox>* vfa, int levels,
                                          const FeatureScales& fs = {})
{
    cfg.validate();
    const int N = cfg.horizon;
    path.validate(cfg.K(), static_cast<std::size_t>(N));
    if (vfa && static_cast<int>(vfa->size()) < N) throw std::invalid_argument("network_evaluate: need one value approximation per stage");
    NetworkEvaluation ev;
    NetworkState s = initial_state(cfg, path);
    for (int t = 0; t < N; ++t) {
        const ValueFunctionApprox* v = (vfa && t + 1 < N) ? &(*vfa)[static_cast<std::size_t>(t)] : nullptr;
        const GreedyDecision d = greedy_action(s, v, cfg, levels, fs);
        ev.states.push_back(s);
        ev.controls.push_back(d.u);
        ev.stage_cost.push_back(d.stage_cost);
        std::vector<double> exc;
        for (int i = 0; i < cfg.K(); ++i) exc.push_back(exchange_power(i, s, d.u));
        ev.exchange.push_back(std::move(exc));
        ev.p_ug.push_back(grid_power(s, d.u));
        ev.ep.push_back(s.ep());
        ev.total += d.stage_cost;
        if (t + 1 < N) s = apply_exogenous(d.post, path_increment(path, static_cast<std::size_t>(t)));
    }
    return ev;
}

struct NetworkRunReport {
    NetworkTraining training;
    NetworkEvaluation adp_actual, myopic_actual;
    NetworkEvaluation adp_planning, myopic_planning;
};

/// Trains on a perturbed forecast of the actual path, then evaluates the
/// trained and myopic policies on both.
inline NetworkRunReport network_adp_run(const NetworkConfig& cfg, const NetworkPath& actual, double forecast_sigma_fraction, std::uint64_t err_seed,
                                        const NetworkAdpParams& prm, std::uint64_t train_seed)
{
    const auto N = static_cast<std::size_t>(cfg.horizon);
    const NetworkPath forecast = sample_network_path(actual, N, forecast_sigma_fraction, err_seed);
    NetworkRunReport rep;
    rep.training = network_adp_train(cfg, forecast, prm, train_seed);
    rep.adp_actual = network_evaluate(cfg, actual, &rep.training.vfa, prm.levels, prm.scales);
    rep.myopic_actual = network_evaluate(cfg, actual, nullptr, prm.levels, prm.scales);
    rep.adp_planning = network_evaluate(cfg, forecast, &rep.training.vfa, prm.levels, prm.scales);
    rep.myopic_planning = network_evaluate(cfg, forecast, nullptr, prm.levels, prm.scales);
    return rep;
}

}  // namespace mgopt
