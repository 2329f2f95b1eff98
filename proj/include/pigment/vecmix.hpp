// SPDX-License-Identifier: Apache-2.0
#pragma once

// Prompt-embedding algebra: weighted interpolation of prompt vectors,
// directional vectors between two end prompts, and the final composition
//
//     v_f = sum_i w_i * v_i  +  sum_j s_j * (a_j - b_j)
//
// All arithmetic is double precision.

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pigment/error.hpp"
#include "pigment/geometry.hpp"
#include "pigment/random.hpp"
#include "pigment/tensor.hpp"

namespace pigment {

// [slots, channels] embedding of one prompt.
struct PromptEmbedding {
    Tensor<double> data;
    std::string source_text;
    std::string embedder_id;

    std::size_t slots() const { return data.dim(0); }
    std::size_t channels() const { return data.dim(1); }
};

// Convex weights over one to three mixed prompts.
class MixWeights {
public:
    static constexpr std::size_t kMaxPrompts = 3;
    static constexpr double kSumTolerance = 1e-9;

    MixWeights() : weights_{1.0} {}

    // Throws ContractError("bad_weights") unless 1 <= N <= 3, each weight is in
    // [0, 1] and the weights sum to 1 within 1e-9.
    explicit MixWeights(std::vector<double> weights) : weights_(std::move(weights)) {
        if (weights_.empty() || weights_.size() > kMaxPrompts) {
            throw ContractError("bad_weights", "mix weights need between 1 and 3 entries, got " +
                                                   std::to_string(weights_.size()));
        }
        double sum = 0.0;
        for (double w : weights_) {
            if (!std::isfinite(w) || w < 0.0 || w > 1.0) {
                throw ContractError("bad_weights", "mix weight outside [0, 1]: " + std::to_string(w));
            }
            sum += w;
        }
        if (std::abs(sum - 1.0) > kSumTolerance) {
            throw ContractError("bad_weights", "mix weights sum to " + std::to_string(sum));
        }
    }

    std::span<const double> values() const noexcept { return weights_; }
    std::size_t size() const noexcept { return weights_.size(); }
    double operator[](std::size_t i) const { return weights_.at(i); }

    friend bool operator==(const MixWeights&, const MixWeights&) = default;

private:
    std::vector<double> weights_;
};

struct DirectionalAxis {
    std::string id;
    PromptEmbedding end_a;
    PromptEmbedding end_b;
    // -1 pulls fully toward end_b, +1 fully toward end_a, 0 is no shift.
    double weight = 0.0;
    Color color_a;
    Color color_b;
};

struct GuidanceVector {
    Tensor<double> data;
    std::vector<double> mix_weights;
    std::vector<std::pair<std::string, double>> axis_weights;
};

// Sum_i w_i * v_i, elementwise.
inline PromptEmbedding interpolate(std::span<const PromptEmbedding> embeddings,
                                   const MixWeights& weights) {
    if (embeddings.size() != weights.size()) {
        throw ContractError("bad_weights", "interpolate: " + std::to_string(embeddings.size()) +
                                               " embeddings but " + std::to_string(weights.size()) +
                                               " weights");
    }
    for (const auto& e : embeddings) {
        require_same_shape(embeddings.front().data, e.data, "interpolate");
    }
    PromptEmbedding out{Tensor<double>(embeddings.front().data.shape()), {}, embeddings.front().embedder_id};
    auto acc = out.data.values();
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        const auto src = embeddings[i].data.values();
        const double w = weights[i];
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += w * src[j];
        out.source_text += (i ? " | " : "") + embeddings[i].source_text;
    }
    return out;
}

// a - b, elementwise.
inline Tensor<double> direction(const DirectionalAxis& axis) {
    require_same_shape(axis.end_a.data, axis.end_b.data, "direction");
    Tensor<double> out(axis.end_a.data.shape());
    const auto a = axis.end_a.data.values();
    const auto b = axis.end_b.data.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline GuidanceVector compose(const PromptEmbedding& base, std::span<const DirectionalAxis> axes,
                              const MixWeights& mix = MixWeights{}) {
    GuidanceVector out{base.data, {mix.values().begin(), mix.values().end()}, {}};
    for (const auto& axis : axes) {
        if (!std::isfinite(axis.weight) || axis.weight < -1.0 || axis.weight > 1.0) {
            throw ContractError("bad_weights", "axis '" + axis.id + "' weight outside [-1, 1]");
        }
        require_same_shape(base.data, axis.end_a.data, "compose");
        const auto dir = direction(axis);
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += axis.weight * dir[i];
        out.axis_weights.emplace_back(axis.id, axis.weight);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Embedders

class Embedder {
public:
    virtual ~Embedder() = default;

    virtual std::string id() const = 0;
    // Declared [slots, channels]; every embedding this handle returns has it.
    virtual Shape shape() const = 0;
    virtual PromptEmbedding embed(std::string_view text) const = 0;
};

inline void check_embedding(const Embedder& embedder, const PromptEmbedding& e) {
    if (e.data.shape() != embedder.shape()) {
        throw ContractError("shape_mismatch", "embedder '" + embedder.id() + "' declared " +
                                                  shape_string(embedder.shape()) + " but produced " +
                                                  shape_string(e.data.shape()));
    }
    if (!e.data.all_finite()) {
        throw ContractError("non_finite", "embedder '" + embedder.id() + "' produced non-finite values");
    }
}

// Deterministic stand-in for a text encoder: standard normals keyed by the
// hash of the text, each token-slot row normalised to unit L2 norm.
class ToyEmbedder final : public Embedder {
public:
    explicit ToyEmbedder(std::size_t slots = 1, std::size_t channels = 64, std::string id = "toy")
        : slots_(slots), channels_(channels), id_(std::move(id)) {
        if (slots_ == 0 || channels_ == 0) throw ContractError("toy embedder needs a non-empty shape");
    }

    std::string id() const override { return id_; }
    Shape shape() const override { return {slots_, channels_}; }

    PromptEmbedding embed(std::string_view text) const override {
        NormalStream rng(stable_hash(text), stream_id(StreamDomain::embedding));
        Tensor<double> data(shape());
        for (std::size_t s = 0; s < slots_; ++s) {
            double norm2 = 0.0;
            for (std::size_t d = 0; d < channels_; ++d) {
                const double z = rng.next();
                data.at(s, d) = z;
                norm2 += z * z;
            }
            const double inv = 1.0 / std::sqrt(norm2);
            for (std::size_t d = 0; d < channels_; ++d) data.at(s, d) *= inv;
        }
        return {std::move(data), std::string(text), id_};
    }

private:
    std::size_t slots_;
    std::size_t channels_;
    std::string id_;
};

}  // namespace pigment
