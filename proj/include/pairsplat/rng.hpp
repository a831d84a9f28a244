// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cmath>

namespace pairsplat {

// Counter-based generator ("splitmix64-v1"). Output is a pure function of
// (seed, draw index), so any point in a run can be reproduced without
// replaying the stream, and results do not depend on libstdc++ distribution
// internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller; one pair per two draws.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Independent substream identified by a label, as a pure function of the
    // parent seed. Used to give every (iteration, purpose) its own stream.
    Rng fork(std::uint64_t label) const {
        std::uint64_t z = state_ ^ (0xA0761D6478BD642FULL + label * 0xE7037ED1A0B428DBULL);
        z = (z ^ (z >> 32)) * 0xD6E8FEB86659FD93ULL;
        z = (z ^ (z >> 32)) * 0xD6E8FEB86659FD93ULL;
        return Rng(z ^ (z >> 32));
    }
    Rng fork(std::uint64_t a, std::uint64_t b) const { return fork(a).fork(b); }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace pairsplat
