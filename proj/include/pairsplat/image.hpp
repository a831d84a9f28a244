// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pairsplat/vec.hpp"

#include <string>
#include <vector>

namespace pairsplat {

// H x W x 3 linear RGB, row-major, channel-interleaved doubles.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> rgb;

    Image() = default;
    Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0.0) {}
    Image(int w, int h, const Vec3& fill) : Image(w, h) {
        for (std::size_t i = 0; i < rgb.size(); i += 3) {
            rgb[i] = fill.x;
            rgb[i + 1] = fill.y;
            rgb[i + 2] = fill.z;
        }
    }

    std::size_t size() const { return rgb.size(); }
    double* data() { return rgb.data(); }
    const double* data() const { return rgb.data(); }

    double& at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    double at(int x, int y, int c) const {
        return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    Vec3 pixel(int x, int y) const {
        const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
        return {rgb[i], rgb[i + 1], rgb[i + 2]};
    }
    void set_pixel(int x, int y, const Vec3& v) {
        const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
        rgb[i] = v.x;
        rgb[i + 1] = v.y;
        rgb[i + 2] = v.z;
    }

    bool same_shape(const Image& o) const { return width == o.width && height == o.height; }
    bool all_finite() const;
};

// Binary PPM (P6, maxval 255), channels clamped to [0,1] and linearly
// quantized. The byte stream is the test-fixture format, so encoding is
// deterministic.
void write_ppm(const Image& img, const std::string& path);
Image read_ppm(const std::string& path);

} // namespace pairsplat
