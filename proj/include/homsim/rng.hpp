#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "homsim/units.hpp"

namespace homsim {

// Deterministic sampling layer over the mt19937_64 bit stream.  The standard
// <random> distributions are implementation-defined, so relying on them would
// break the bit-identical-across-toolchains reproducibility contract; these
// samplers pin the exact draw sequence.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t raw() { return eng_(); }

    // Uniform on (0, 1]: never returns 0, so log(uniform()) is always finite.
    double uniform() {
        return static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller, caching the second deviate.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = two_pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    double exponential(double mean) { return -mean * std::log(uniform()); }

    // Bernoulli(p): single uniform draw.
    bool bernoulli(double p) { return uniform() <= p; }

    // Poisson by inter-arrival summation; adequate for the count scales used
    // here (scan pixels, background windows).
    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        double t = exponential(1.0);
        std::uint64_t n = 0;
        while (t <= mean) {
            ++n;
            t += exponential(1.0);
        }
        return n;
    }

    // Number of failures before the first success of a Bernoulli(p) sequence
    // (geometric on {0,1,2,...}), computed from one uniform draw.  Used to
    // skip empty pulse slots in bulk.
    std::uint64_t geometric_skips(double p) {
        if (p >= 1.0) return 0;
        double denom = std::log1p(-p);
        double k = std::floor(std::log(uniform()) / denom);
        return static_cast<std::uint64_t>(k);
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace homsim
