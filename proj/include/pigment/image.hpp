// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pigment/error.hpp"

namespace pigment {

// 8-bit RGBA raster, row-major, 4 bytes per pixel.
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> rgba;

    Image() = default;
    Image(std::size_t w, std::size_t h) : width(w), height(h), rgba(w * h * 4, 0) {}

    std::uint8_t* pixel(std::size_t x, std::size_t y) { return rgba.data() + (y * width + x) * 4; }
    const std::uint8_t* pixel(std::size_t x, std::size_t y) const { return rgba.data() + (y * width + x) * 4; }

    friend bool operator==(const Image&, const Image&) = default;
};

// Boolean raster, one byte per cell (0 or 1).
struct Bitmap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> bits;

    Bitmap() = default;
    Bitmap(std::size_t w, std::size_t h, bool fill = false) : width(w), height(h), bits(w * h, fill ? 1 : 0) {}

    bool get(std::size_t x, std::size_t y) const { return bits[y * width + x] != 0; }
    void set(std::size_t x, std::size_t y, bool v = true) { bits[y * width + x] = v ? 1 : 0; }
    std::size_t count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }
    bool any() const { return count() > 0; }

    friend bool operator==(const Bitmap&, const Bitmap&) = default;
};

// Pixels whose alpha is non-zero.
inline Bitmap alpha_mask(const Image& img) {
    Bitmap out(img.width, img.height);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x) out.set(x, y, img.pixel(x, y)[3] > 0);
    return out;
}

// A cell of the coarse grid is set if ANY pixel of its factor x factor block is set.
inline Bitmap downsample_any(const Bitmap& fine, std::size_t factor) {
    if (factor == 0 || fine.width % factor || fine.height % factor) {
        throw ContractError("resolution_mismatch", "raster " + std::to_string(fine.width) + "x" +
                                                       std::to_string(fine.height) +
                                                       " is not a multiple of " + std::to_string(factor));
    }
    Bitmap out(fine.width / factor, fine.height / factor);
    for (std::size_t y = 0; y < fine.height; ++y)
        for (std::size_t x = 0; x < fine.width; ++x)
            if (fine.get(x, y)) out.set(x / factor, y / factor);
    return out;
}

// Alpha-composite over opaque white.
inline Image flatten_on_white(const Image& img) {
    Image out = img;
    for (std::size_t i = 0; i < img.rgba.size(); i += 4) {
        const unsigned a = img.rgba[i + 3];
        for (int c = 0; c < 3; ++c) {
            out.rgba[i + c] = static_cast<std::uint8_t>((img.rgba[i + c] * a + 255u * (255u - a) + 127u) / 255u);
        }
        out.rgba[i + 3] = 255;
    }
    return out;
}

}  // namespace pigment
