#ifndef UAVFL_RNG_HPP
#define UAVFL_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace uavfl {

// Deterministic random stream. All sampling goes through this class instead of
// std:: distributions, which are implementation-defined and would break
// golden tests across standard libraries.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    // Derives an independent stream; used to give each run/device its own
    // stream without sharing state.
    RandomStream fork(std::uint64_t stream_id) const {
        std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ull * (stream_id + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return RandomStream(z ^ (z >> 31));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Marsaglia polar method.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = uniform(-1.0, 1.0);
            v = uniform(-1.0, 1.0);
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    // Inversion by sequential search in log space; exact for the rates used
    // here (<= a few hundred).
    long poisson(double rate) {
        if (rate <= 0.0) return 0;
        const double log_u = std::log(1.0 - uniform());
        double log_p = -rate;
        double log_cdf = log_p;
        long k = 0;
        while (log_u > log_cdf && k < 100000) {
            ++k;
            log_p += std::log(rate / static_cast<double>(k));
            log_cdf += std::log1p(std::exp(log_p - log_cdf));
        }
        return k;
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace uavfl

#endif
