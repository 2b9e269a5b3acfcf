#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <system_error>

namespace mgopt {

/// Thrown when a problem instance admits no feasible control (empty action
/// set, ramp demand beyond storage capability, ...). The CLI maps it to exit 2.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown on numerical breakdown (RLS gain denominator <= 0, QP not
/// converging). The CLI maps it to exit 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Shortest round-trip decimal representation; identical on every platform
/// that implements std::to_chars.
inline std::string format_double(double v)
{
    if (v == 0.0) return "0";  // folds -0 into 0
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, res.ptr);
}

/// Seeded Gaussian source. mt19937_64 is fully specified by the standard;
/// the uniform and normal transforms are done here so draws are bit-identical
/// across standard library implementations.
class GaussianSource {
public:
    explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

    double uniform()
    {
        // 53 random mantissa bits in [0, 1)
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(angle);
        has_spare_ = true;
        return r * std::cos(angle);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Derives independent stream seeds from a base seed (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream)
{
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Relative-or-absolute closeness used for argmin tie detection.
inline bool nearly_equal(double a, double b, double rel = 1e-12)
{
    return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

namespace detail {

/// Tie-break between equal-cost actions: smaller magnitude, then discharge.
inline bool prefer_smaller(double a, double b)
{
    const double ma = std::abs(a), mb = std::abs(b);
    if (ma != mb) return ma < mb;
    return a > b;
}

}  // namespace detail

/// Harmonic smoothing schedule eps / (eps + n^beta - 1), n >= 1.
inline double harmonic_stepsize(int n, double eps, double beta)
{
    if (n < 1) throw std::invalid_argument("harmonic_stepsize: n must be >= 1");
    if (eps <= 0.0 || beta <= 0.0) throw std::invalid_argument("harmonic_stepsize: eps and beta must be positive");
    return eps / (eps + (std::pow(static_cast<double>(n), beta) - 1.0));
}

}  // namespace mgopt
