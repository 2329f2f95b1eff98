// SPDX-License-Identifier: Apache-2.0
#pragma once

// Lossless raster payloads. Thin wrapper over libpng's simplified API;
// everything is 8-bit RGBA in memory.

#include <png.h>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pigment/error.hpp"
#include "pigment/image.hpp"

namespace pigment {

inline std::vector<std::uint8_t> encode_png(const Image& img) {
    png_image info{};
    info.version = PNG_IMAGE_VERSION;
    info.width = static_cast<png_uint_32>(img.width);
    info.height = static_cast<png_uint_32>(img.height);
    info.format = PNG_FORMAT_RGBA;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&info, nullptr, &size, 0, img.rgba.data(), 0, nullptr)) {
        throw Error("png", std::string("png size query failed: ") + info.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&info, out.data(), &size, 0, img.rgba.data(), 0, nullptr)) {
        throw Error("png", std::string("png encode failed: ") + info.message);
    }
    out.resize(size);
    return out;
}

// Throws LoadError("bad_png") on anything libpng rejects.
inline Image decode_png(std::span<const std::uint8_t> bytes) {
    png_image info{};
    info.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&info, bytes.data(), bytes.size())) {
        throw LoadError("bad_png", std::string("png header rejected: ") + info.message);
    }
    info.format = PNG_FORMAT_RGBA;
    Image img(info.width, info.height);
    if (!png_image_finish_read(&info, nullptr, img.rgba.data(), 0, nullptr)) {
        png_image_free(&info);
        throw LoadError("bad_png", std::string("png decode failed: ") + info.message);
    }
    return img;
}

}  // namespace pigment
