// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "pairsplat/image.hpp"

#include "pairsplat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace pairsplat {

bool Image::all_finite() const {
    return std::all_of(rgb.begin(), rgb.end(), [](double v) { return std::isfinite(v); });
}

void write_ppm(const Image& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_ppm: cannot open " + path);
    char header[64];
    const int len = std::snprintf(header, sizeof(header), "P6\n%d %d\n255\n", img.width, img.height);
    out.write(header, len);
    std::vector<unsigned char> bytes(img.rgb.size());
    for (std::size_t i = 0; i < img.rgb.size(); ++i) {
        const double v = std::clamp(img.rgb[i], 0.0, 1.0);
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write_ppm: short write to " + path);
}

Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_ppm: cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255)
        throw IoError("read_ppm: unsupported header in " + path);
    in.get(); // single whitespace byte after maxval
    Image img(w, h);
    std::vector<unsigned char> bytes(img.rgb.size());
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
        throw IoError("read_ppm: truncated pixel data in " + path);
    for (std::size_t i = 0; i < bytes.size(); ++i) img.rgb[i] = bytes[i] / 255.0;
    return img;
}

} // namespace pairsplat
