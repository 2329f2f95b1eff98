// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reference computations for the tests. Written independently of the
// library: long double arithmetic, closed forms, textbook formulations.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>
#include <vector>

namespace oracle {

// Scaled-linear schedule, cumulative product in long double.
inline std::vector<long double> alpha_bar(int train_steps = 1000, long double beta_start = 8.5e-4L,
                                          long double beta_end = 1.2e-2L) {
    std::vector<long double> out;
    long double prod = 1.0L;
    for (int i = 0; i < train_steps; ++i) {
        const long double s = std::sqrt(beta_start) +
                              (std::sqrt(beta_end) - std::sqrt(beta_start)) * i / static_cast<long double>(train_steps - 1);
        prod *= 1.0L - s * s;
        out.push_back(prod);
    }
    return out;
}

// Projection of p onto segment ab as a fraction of |ab|, clamped.
inline std::array<double, 2> pair_weights(double ax, double ay, double bx, double by, double px, double py) {
    const long double dx = bx - ax, dy = by - ay;
    long double t = ((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy);
    t = std::clamp(t, 0.0L, 1.0L);
    return {static_cast<double>(1.0L - t), static_cast<double>(t)};
}

// Barycentric coordinates by signed areas, negatives clamped, renormalised.
inline std::array<double, 3> triple_weights(const std::array<std::array<double, 2>, 3>& v, double px, double py) {
    auto area = [](long double x1, long double y1, long double x2, long double y2, long double x3, long double y3) {
        return (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1);
    };
    const long double total = area(v[0][0], v[0][1], v[1][0], v[1][1], v[2][0], v[2][1]);
    std::array<long double, 3> w = {area(px, py, v[1][0], v[1][1], v[2][0], v[2][1]) / total,
                                    area(v[0][0], v[0][1], px, py, v[2][0], v[2][1]) / total,
                                    area(v[0][0], v[0][1], v[1][0], v[1][1], px, py) / total};
    long double sum = 0;
    for (auto& x : w) {
        x = std::max(x, 0.0L);
        sum += x;
    }
    return {static_cast<double>(w[0] / sum), static_cast<double>(w[1] / sum), static_cast<double>(w[2] / sum)};
}

// Philox4x32-10 in the mulhilo formulation.
inline std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> x, std::array<std::uint32_t, 2> k) {
    auto mulhilo = [](std::uint32_t a, std::uint32_t b, std::uint32_t& hi) {
        const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
        hi = static_cast<std::uint32_t>(p >> 32);
        return static_cast<std::uint32_t>(p);
    };
    for (int r = 0; r < 10; ++r) {
        std::uint32_t hi0, hi1;
        const std::uint32_t lo0 = mulhilo(0xD2511F53u, x[0], hi0);
        const std::uint32_t lo1 = mulhilo(0xCD9E8D57u, x[2], hi1);
        x = {hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0};
        k[0] += 0x9E3779B9u;
        k[1] += 0xBB67AE85u;
    }
    return x;
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (char c : s) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
    return h;
}

// Standard normal number i of (key, stream): one Philox block per draw.
inline double normal(std::uint64_t key, std::uint64_t stream, std::uint64_t i) {
    const auto b = philox({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32),
                           static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
                          {static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)});
    const std::uint64_t a = (static_cast<std::uint64_t>(b[1]) << 32) | b[0];
    const std::uint64_t c = (static_cast<std::uint64_t>(b[3]) << 32) | b[2];
    const double u1 = std::ldexp(static_cast<double>((a >> 11) + 1), -53);
    const double u2 = std::ldexp(static_cast<double>(c >> 11), -53);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Toy text embedding: normals keyed by the text hash, rows scaled to unit norm.
inline std::vector<double> toy_embedding(std::string_view text, std::size_t slots, std::size_t channels) {
    const std::uint64_t stream = std::uint64_t{3} << 32;
    std::vector<double> out(slots * channels);
    for (std::size_t s = 0; s < slots; ++s) {
        long double n2 = 0;
        for (std::size_t d = 0; d < channels; ++d) {
            out[s * channels + d] = normal(fnv1a(text), stream, s * channels + d);
            n2 += static_cast<long double>(out[s * channels + d]) * out[s * channels + d];
        }
        for (std::size_t d = 0; d < channels; ++d) out[s * channels + d] /= static_cast<double>(std::sqrt(n2));
    }
    return out;
}

// Deterministic test-side generator (independent of the library rng).
struct Gen {
    std::mt19937_64 eng;
    explicit Gen(std::uint64_t seed) : eng(seed) {}
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng); }
    std::size_t index(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(eng); }
    double normal() { return std::normal_distribution<double>()(eng); }
    // Weights on the simplex that sum to one within rounding of a few ulps.
    std::vector<double> simplex(std::size_t n) {
        std::vector<double> w(n);
        double sum = 0;
        for (auto& x : w) sum += (x = -std::log(uniform(1e-12, 1.0)));
        for (auto& x : w) x /= sum;
        double acc = 0;
        for (std::size_t i = 0; i + 1 < n; ++i) acc += w[i];
        w[n - 1] = 1.0 - acc;
        if (w[n - 1] < 0) w[n - 1] = 0;
        return w;
    }
};

}  // namespace oracle
