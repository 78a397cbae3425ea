#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "error.hpp"

namespace l0de {

/// splitmix64 finalizer; derives independent replicate seeds from a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/**
 * Seeded random draws on top of std::mt19937_64.
 *
 * A fresh distribution object is used for every draw so that the stream
 * depends only on the seed and the sequence of calls.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) {
        if (!(lo < hi)) {
            throw Error("uniform: lo must be below hi");
        }
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    double normal(double mean = 0.0, double sd = 1.0) {
        if (!(sd >= 0)) {
            throw Error("normal: standard deviation must be nonnegative");
        }
        if (sd == 0) return mean;
        return std::normal_distribution<double>(mean, sd)(engine_);
    }

    /// Gamma with the given shape and scale (mean shape * scale).
    double gamma(double shape, double scale) {
        if (!(shape > 0) || !(scale > 0)) {
            throw Error("gamma: shape and scale must be positive");
        }
        return std::gamma_distribution<double>(shape, scale)(engine_);
    }

    std::uint64_t poisson(double mean) {
        if (!(mean >= 0) || !std::isfinite(mean)) {
            throw Error("poisson: mean must be finite and nonnegative");
        }
        if (mean == 0) return 0;
        return static_cast<std::uint64_t>(std::poisson_distribution<std::int64_t>(mean)(engine_));
    }

    std::uint64_t binomial(std::uint64_t trials, double p) {
        if (!(p >= 0 && p <= 1)) {
            throw Error("binomial: p must lie in [0, 1]");
        }
        if (trials == 0 || p == 0) return 0;
        if (p == 1) return trials;
        return static_cast<std::uint64_t>(std::binomial_distribution<std::int64_t>(static_cast<std::int64_t>(trials), p)(engine_));
    }

    /// Negative binomial with mean `mean` and variance mean + dispersion * mean^2, as a gamma-Poisson mixture.
    std::uint64_t negative_binomial(double mean, double dispersion) {
        if (!(mean >= 0) || !(dispersion >= 0)) {
            throw Error("negative_binomial: mean and dispersion must be nonnegative");
        }
        if (mean == 0) return 0;
        if (dispersion == 0) return poisson(mean);
        const double shape = 1.0 / dispersion;
        return poisson(gamma(shape, mean / shape));
    }

    /// Multinomial counts over `weights` (normalized internally) by sequential conditional binomials.
    std::vector<std::uint64_t> multinomial(std::uint64_t trials, std::span<const double> weights) {
        double total = 0;
        for (double w : weights) {
            if (!(w >= 0) || !std::isfinite(w)) {
                throw Error("multinomial: weights must be finite and nonnegative");
            }
            total += w;
        }
        if (!(total > 0)) {
            throw Error("multinomial: weights sum to zero");
        }
        std::vector<std::uint64_t> out(weights.size(), 0);
        std::uint64_t left = trials;
        double mass_left = total;
        for (std::size_t k = 0; k < weights.size() && left > 0; ++k) {
            if (k + 1 == weights.size()) {
                out[k] = left;
                break;
            }
            const double p = mass_left > 0 ? std::min(1.0, weights[k] / mass_left) : 1.0;
            out[k] = binomial(left, p);
            left -= out[k];
            mass_left -= weights[k];
        }
        return out;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace l0de
