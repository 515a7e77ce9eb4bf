#pragma once

#include "bktrace/types.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace bktrace {

/// SplitMix64 finalizer. Used to derive independent stream seeds from a
/// (base seed, index) pair.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the stream used by trial `trial` of an experiment seeded with `base`.
constexpr std::uint64_t trial_seed(std::uint64_t base, std::uint64_t trial) noexcept
{
    return base + trial;
}

/// Deterministic random source with platform-independent transforms.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The standard distributions are implementation-defined, so the
/// uniform, normal and Rademacher transforms are written out here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t bits() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on the open interval (0, 1).
    double uniform_open()
    {
        double u = 0.0;
        while (u == 0.0) u = uniform01();
        return u;
    }

    /// Uniform integer in [0, bound) by rejection, unbiased.
    std::uint64_t uniform_index(std::uint64_t bound)
    {
        const std::uint64_t limit = bound * (~std::uint64_t{0} / bound);
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % bound;
    }

    /// Standard normal via Box-Muller; the second value of each pair is cached.
    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double rademacher() { return (engine_() >> 63) ? 1.0 : -1.0; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// n x l matrix of i.i.d. standard normals, filled column by column.
///
/// Matrices drawn with the same seed and the same n are nested: the first
/// l columns of a wider draw equal the narrower draw.
template <typename Scalar = double>
Matrix<Scalar> gaussian_matrix(Index n, Index l, std::uint64_t seed)
{
    if (l < 1 || n < 1) throw ParameterError("gaussian_matrix: n and l must be positive");
    if (l > n) throw ParameterError("gaussian_matrix: l must not exceed n");
    Matrix<Scalar> omega(n, l);
    Rng rng(seed);
    for (Index j = 0; j < l; ++j)
        for (Index i = 0; i < n; ++i) omega(i, j) = static_cast<Scalar>(rng.normal());
    return omega;
}

/// Rademacher probe for sample `sample` of a Hutchinson run seeded with `seed`.
/// Each sample owns its stream, so any chunking of the samples yields the same probes.
template <typename Scalar = double>
Vector<Scalar> rademacher_vector(Index n, std::uint64_t seed, std::uint64_t sample)
{
    Rng rng(splitmix64(seed) ^ splitmix64(sample + 0x5851f42d4c957f2dULL));
    Vector<Scalar> c(n);
    for (Index i = 0; i < n; ++i) c(i) = static_cast<Scalar>(rng.rademacher());
    return c;
}

} // namespace bktrace
