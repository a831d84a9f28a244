// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "pairsplat/dropout.hpp"

#include "pairsplat/errors.hpp"

#include <algorithm>

namespace pairsplat {

std::size_t DropoutMask::kept_count() const {
    return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), std::uint8_t{1}));
}

DropoutMask DropoutMask::all_ones(std::size_t n) {
    DropoutMask m;
    m.keep.assign(n, 1);
    m.rate = 0.0;
    return m;
}

DropoutMask sample_mask(std::size_t n, double rate, Rng& rng) {
    if (rate < 0.0 || rate > 1.0)
        throw ConfigError("sample_mask: rate must lie in [0, 1]");
    DropoutMask m;
    m.rate = rate;
    m.keep.resize(n);
    for (std::size_t i = 0; i < n; ++i) m.keep[i] = rng.next_double() >= rate ? 1 : 0;
    return m;
}

double compensation_factor(double rate, bool enabled) {
    if (!enabled) return 1.0;
    if (rate < 0.0 || rate >= 1.0)
        throw ConfigError("compensation_factor: rate must lie in [0, 1) when enabled");
    return 1.0 / (1.0 - rate);
}

} // namespace pairsplat
