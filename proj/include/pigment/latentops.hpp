// SPDX-License-Identifier: Apache-2.0
#pragma once

// Spatial control in latent space. Each latent cell falls in one of four
// regions, from the stencil and from whether the canvas already has paint:
//
//             empty   filled
//   stencil    A1       A2
//   outside    B        C
//
// Before every denoiser call, B and C are pinned to the noised encoding of
// the existing canvas, A2 is pinned only during the early steps selected by
// the overcoat percentage, and A1 is left to the sampler.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pigment/error.hpp"
#include "pigment/image.hpp"
#include "pigment/random.hpp"
#include "pigment/scheduler.hpp"
#include "pigment/tensor.hpp"

namespace pigment {

enum class Region : std::uint8_t { A1, A2, B, C };

inline const char* region_name(Region r) {
    switch (r) {
        case Region::A1: return "A1";
        case Region::A2: return "A2";
        case Region::B: return "B";
        case Region::C: return "C";
    }
    return "?";
}

struct RegionMap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<Region> labels;

    Region at(std::size_t x, std::size_t y) const { return labels[y * width + x]; }

    std::size_t count(Region r) const {
        std::size_t n = 0;
        for (auto l : labels) n += (l == r);
        return n;
    }
};

struct StencilMask {
    Bitmap bitmap;       // canvas resolution
    Bitmap latent_mask;  // one cell per latent position, dilated

    static StencilMask from_bitmap(Bitmap bitmap, std::size_t factor) {
        Bitmap coarse = downsample_any(bitmap, factor);
        return {std::move(bitmap), std::move(coarse)};
    }

    bool empty() const { return !latent_mask.any(); }
};

inline RegionMap classify_regions(const Bitmap& filled, const Bitmap& stencil) {
    if (filled.width != stencil.width || filled.height != stencil.height) {
        throw ContractError("resolution_mismatch",
                            "canvas mask " + std::to_string(filled.width) + "x" + std::to_string(filled.height) +
                                " vs stencil " + std::to_string(stencil.width) + "x" +
                                std::to_string(stencil.height));
    }
    RegionMap out{filled.width, filled.height, std::vector<Region>(filled.bits.size())};
    for (std::size_t i = 0; i < out.labels.size(); ++i) {
        const bool s = stencil.bits[i] != 0;
        const bool f = filled.bits[i] != 0;
        out.labels[i] = s ? (f ? Region::A2 : Region::A1) : (f ? Region::C : Region::B);
    }
    return out;
}

struct OvercoatConfig {
    double percent = 0.0;  // o, in [0, 100]
    std::uint64_t seed = 0;

    void validate() const {
        if (!std::isfinite(percent) || percent < 0.0 || percent > 100.0) {
            throw ContractError("bad_overcoat", "overcoat " + std::to_string(percent) + " outside [0, 100]");
        }
    }

    // k < (1 - o/100) * K, evaluated as 100 k < (100 - o) K so that integral
    // percentages never round across the boundary.
    bool pins_filled_stencil(int k, int total_steps) const {
        return 100.0 * k < (100.0 - percent) * total_steps;
    }
};

// One step of latent manipulation. `rng` must be positioned at the start of
// this step's overcoat draws; it advances by one draw per latent element.
template <std::floating_point T>
Tensor<T> mask_step(const Tensor<T>& latent, const Tensor<T>& canvas_latent, const RegionMap& regions,
                    int k, const OvercoatConfig& overcoat, const NoiseSchedule& schedule, NormalStream& rng) {
    require_same_shape(latent, canvas_latent, "mask_step");
    overcoat.validate();
    if (latent.rank() != 3 || latent.dim(1) != regions.height || latent.dim(2) != regions.width) {
        throw ContractError("shape_mismatch", "mask_step: latent " + shape_string(latent.shape()) +
                                                  " vs region map " + std::to_string(regions.height) + "x" +
                                                  std::to_string(regions.width));
    }
    schedule.check_step(k, schedule.steps() - 1);

    const Tensor<T> noised = add_noise(canvas_latent, k, schedule, rng);
    const bool pin_a2 = overcoat.pins_filled_stencil(k, schedule.steps());
    Tensor<T> out = latent;
    const std::size_t plane = regions.labels.size();
    for (std::size_t c = 0; c < latent.dim(0); ++c) {
        for (std::size_t cell = 0; cell < plane; ++cell) {
            const Region r = regions.labels[cell];
            if (r == Region::B || r == Region::C || (r == Region::A2 && pin_a2)) {
                out[c * plane + cell] = noised[c * plane + cell];
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Canvas <-> latent codec

class Codec {
public:
    virtual ~Codec() = default;

    virtual std::size_t scale_factor() const = 0;
    virtual std::size_t channels() const = 0;
    virtual LatentTensor encode(const Image& canvas) const = 0;
    virtual Image decode(const LatentTensor& latent) const = 0;

    Shape latent_shape(std::size_t canvas_w, std::size_t canvas_h) const {
        return {channels(), canvas_h / scale_factor(), canvas_w / scale_factor()};
    }
};

// Average-pool RGB (scaled to [-1, 1]) by the factor; decode upsamples with
// nearest neighbour and writes opaque pixels. Images that are constant over
// each factor x factor block survive a round trip up to 8-bit quantisation.
class ToyCodec final : public Codec {
public:
    explicit ToyCodec(std::size_t factor = 8) : factor_(factor) {
        if (factor_ == 0) throw ContractError("codec factor must be positive");
    }

    std::size_t scale_factor() const override { return factor_; }
    std::size_t channels() const override { return 3; }

    LatentTensor encode(const Image& canvas) const override {
        if (canvas.width % factor_ || canvas.height % factor_ || canvas.width == 0 || canvas.height == 0) {
            throw ContractError("resolution_mismatch", "canvas " + std::to_string(canvas.width) + "x" +
                                                           std::to_string(canvas.height) +
                                                           " is not a multiple of " + std::to_string(factor_));
        }
        const std::size_t hl = canvas.height / factor_;
        const std::size_t wl = canvas.width / factor_;
        LatentTensor out({3, hl, wl});
        const double cells = static_cast<double>(factor_ * factor_);
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t y = 0; y < hl; ++y) {
                for (std::size_t x = 0; x < wl; ++x) {
                    double acc = 0.0;
                    for (std::size_t dy = 0; dy < factor_; ++dy)
                        for (std::size_t dx = 0; dx < factor_; ++dx)
                            acc += canvas.pixel(x * factor_ + dx, y * factor_ + dy)[c];
                    out.at(c, y, x) = static_cast<float>(acc / cells / 127.5 - 1.0);
                }
            }
        }
        return out;
    }

    Image decode(const LatentTensor& latent) const override {
        if (latent.rank() != 3 || latent.dim(0) != 3) {
            throw ContractError("shape_mismatch", "toy codec decodes [3, H, W], got " + shape_string(latent.shape()));
        }
        const std::size_t hl = latent.dim(1);
        const std::size_t wl = latent.dim(2);
        Image out(wl * factor_, hl * factor_);
        for (std::size_t y = 0; y < out.height; ++y) {
            for (std::size_t x = 0; x < out.width; ++x) {
                auto* px = out.pixel(x, y);
                for (std::size_t c = 0; c < 3; ++c) {
                    const double v = std::clamp(static_cast<double>(latent.at(c, y / factor_, x / factor_)), -1.0, 1.0);
                    px[c] = static_cast<std::uint8_t>(std::lround((v + 1.0) * 127.5));
                }
                px[3] = 255;
            }
        }
        return out;
    }

private:
    std::size_t factor_;
};

// Canvas latent used for pinning: existing paint over a white background.
inline LatentTensor encode_canvas(const Codec& codec, const Image& canvas) {
    return codec.encode(flatten_on_white(canvas));
}

// Write decoded pixels inside the stencil; every other pixel is copied from
// the prior canvas unchanged.
inline Image composite(const LatentTensor& final_latent, const Codec& codec, const StencilMask& stencil,
                       const Image& prior) {
    const Image decoded = codec.decode(final_latent);
    if (decoded.width != prior.width || decoded.height != prior.height ||
        stencil.bitmap.width != prior.width || stencil.bitmap.height != prior.height) {
        throw ContractError("resolution_mismatch", "composite: decoded, stencil and canvas sizes differ");
    }
    Image out = prior;
    for (std::size_t y = 0; y < prior.height; ++y) {
        for (std::size_t x = 0; x < prior.width; ++x) {
            if (!stencil.bitmap.get(x, y)) continue;
            std::copy_n(decoded.pixel(x, y), 4, out.pixel(x, y));
        }
    }
    return out;
}

}  // namespace pigment
