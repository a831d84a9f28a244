// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "kernels_backends.hpp"

#include <atomic>

namespace pairsplat::kern {
namespace {

const Kernels* probe() {
    if (const Kernels* neon = neon_backend()) return neon;
    if (cpu_has_avx2()) {
        if (const Kernels* avx2 = avx2_backend()) return avx2;
    }
    return &scalar();
}

std::atomic<const Kernels*> override_table{nullptr};

} // namespace

const Kernels& active() {
    const Kernels* forced = override_table.load(std::memory_order_acquire);
    if (forced) return *forced;
    static const Kernels* probed = probe();
    return *probed;
}

void set_active(const Kernels* k) { override_table.store(k, std::memory_order_release); }

std::size_t available(const Kernels** out, std::size_t cap) {
    std::size_t n = 0;
    if (n < cap) out[n++] = &scalar();
    if (cpu_has_avx2() && avx2_backend() && n < cap) out[n++] = avx2_backend();
    if (neon_backend() && n < cap) out[n++] = neon_backend();
    return n;
}

} // namespace pairsplat::kern
