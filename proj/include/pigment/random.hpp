// SPDX-License-Identifier: Apache-2.0
#pragma once

// Counter-based randomness. Every draw is a pure function of
// (key, stream, position), so any point of a stream can be restored in O(1)
// from a three-word checkpoint. This is what makes rollback and replay exact.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace pigment {

// 64-bit FNV-1a. Stable across platforms and releases; used to seed prompt
// embeddings and projection matrices from text ids.
constexpr std::uint64_t stable_hash(std::string_view text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter generate(Counter ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85;
};

// Streams are partitioned by purpose so that equal user seeds never alias
// two different noise sources.
enum class StreamDomain : std::uint32_t {
    init_noise = 1,
    overcoat = 2,
    embedding = 3,
    projection = 4,
    sampling = 5,
};

constexpr std::uint64_t stream_id(StreamDomain domain, std::uint32_t index = 0) noexcept {
    return (static_cast<std::uint64_t>(domain) << 32) | index;
}

struct RngCheckpoint {
    std::uint64_t key = 0;
    std::uint64_t stream = 0;
    std::uint64_t position = 0;

    friend bool operator==(const RngCheckpoint&, const RngCheckpoint&) = default;
};

// One Philox block per draw. next() and uniform() both advance position by one.
class NormalStream {
public:
    NormalStream(std::uint64_t key, std::uint64_t stream, std::uint64_t position = 0) noexcept
        : key_(key), stream_(stream), position_(position) {}

    static NormalStream restore(const RngCheckpoint& cp) noexcept {
        return NormalStream(cp.key, cp.stream, cp.position);
    }

    RngCheckpoint checkpoint() const noexcept { return {key_, stream_, position_}; }

    std::uint64_t position() const noexcept { return position_; }

    // Standard normal via Box-Muller (cosine branch only, so draw i is
    // independent of whether draw i-1 was consumed).
    double next() noexcept { return normal_at(key_, stream_, position_++); }

    // Uniform on [0, 1).
    double uniform() noexcept {
        const auto block = block_at(key_, stream_, position_++);
        return to_unit(join(block[0], block[1]));
    }

    std::uint64_t next_u64() noexcept {
        const auto block = block_at(key_, stream_, position_++);
        return join(block[0], block[1]);
    }

    static double normal_at(std::uint64_t key, std::uint64_t stream, std::uint64_t index) noexcept {
        const auto block = block_at(key, stream, index);
        // u1 in (0, 1] keeps the log finite.
        const double u1 = (static_cast<double>(join(block[0], block[1]) >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = to_unit(join(block[2], block[3]));
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    static Philox4x32::Counter block_at(std::uint64_t key, std::uint64_t stream,
                                        std::uint64_t index) noexcept {
        return Philox4x32::generate(
            {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
             static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
            {static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)});
    }

    static constexpr std::uint64_t join(std::uint32_t lo, std::uint32_t hi) noexcept {
        return (static_cast<std::uint64_t>(hi) << 32) | lo;
    }

    static constexpr double to_unit(std::uint64_t bits) noexcept {
        return static_cast<double>(bits >> 11) * 0x1.0p-53;
    }

    std::uint64_t key_;
    std::uint64_t stream_;
    std::uint64_t position_;
};

}  // namespace pigment
