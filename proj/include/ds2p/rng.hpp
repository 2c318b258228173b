#pragma once
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace ds2p {

// Counter-based 64-bit generator: output k is the SplitMix64 finalizer of
// key + k * golden_gamma. Streams are derived by hashing (key, stream id),
// so any column or trial can be sampled independently of the others and
// results do not depend on the order in which streams are consumed.
class Rng
{
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix(key_ + (counter_++) * golden_gamma); }

    // Independent child stream keyed on `stream`.
    Rng split(std::uint64_t stream) const
    {
        Rng child;
        child.key_ = mix(key_ ^ mix(stream + 0xbb67ae8584caa73bULL));
        child.counter_ = 0;
        return child;
    }

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

    // Uniform on [0, 1) with 53 random bits.
    double uniform()
    {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform on {0, ..., n-1}, unbiased by rejection.
    std::uint64_t index(std::uint64_t n)
    {
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t x;
        do {
            x = (*this)();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller; consumes two outputs per call.
    double normal()
    {
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double rademacher() { return ((*this)() >> 63) ? 1.0 : -1.0; }

private:
    static constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ULL;

    static constexpr std::uint64_t mix(std::uint64_t z)
    {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

} // namespace ds2p
