// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pairsplat/rng.hpp"

#include <cstdint>
#include <vector>

namespace pairsplat {

// Per-primitive Bernoulli keep/drop vector. Immutable after sampling.
struct DropoutMask {
    std::vector<std::uint8_t> keep;
    double rate = 0.0;
    std::uint64_t seed = 0;

    std::size_t size() const { return keep.size(); }
    bool kept(std::size_t i) const { return keep[i] != 0; }
    std::size_t kept_count() const;

    static DropoutMask all_ones(std::size_t n);
};

// Each bit kept independently with probability 1 - rate. Draws n values from
// rng, so consecutive calls on one generator give independent masks.
DropoutMask sample_mask(std::size_t n, double rate, Rng& rng);

// Survivor-opacity rescale 1/(1 - rate), applied to activated opacities at
// render time, so the expected composite matches the undropped render.
double compensation_factor(double rate, bool enabled);

} // namespace pairsplat
