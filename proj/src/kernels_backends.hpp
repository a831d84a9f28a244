// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pairsplat/kernels.hpp"

namespace pairsplat::kern {

// Each returns nullptr when the backend is not compiled for this target.
const Kernels* avx2_backend();
const Kernels* neon_backend();

// True when the running CPU can execute the AVX2 backend.
bool cpu_has_avx2();

} // namespace pairsplat::kern
