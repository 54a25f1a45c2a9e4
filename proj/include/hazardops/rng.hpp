#pragma once

#include <cstdint>

namespace hazardops::rng {

// Counter-based generator: every draw is a pure function of
// (seed, stream, index), so ensembles can be generated in any order,
// in parallel, or one sample at a time and always produce the same bits.

// Avalanche mix of three 64-bit words (splitmix64-style finalizers).
std::uint64_t mix(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

// Uniform draw strictly inside (0, 1).
double uniform01(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

// Standard normal via the AS241 inverse CDF applied to uniform01.
double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

// Inverse standard normal CDF (Wichura's PPND16), exposed for tests.
double inverse_normal_cdf(double p);

// Deterministic natural log built from frexp + an atanh series, used by the
// inverse CDF so draws do not depend on the platform's libm.
double portable_log(double x);

// Small stateful view over the counter generator: a fixed (seed, stream)
// with an advancing index. Convenient for shuffles and weight init.
class Sequence {
public:
    Sequence(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    double uniform() { return uniform01(seed_, stream_, index_++); }
    double normal() { return rng::normal(seed_, stream_, index_++); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return mix(seed_, stream_, index_++) % n;
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t index_ = 0;
};

} // namespace hazardops::rng
