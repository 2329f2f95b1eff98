// SPDX-License-Identifier: Apache-2.0
#pragma once

// Noise-prediction backends and classifier-free guidance.
//
// The toy denoiser is an analytic "relaxation" model: it believes the clean
// latent is a blend of what the current latent implies and a target x*
// derived from the conditioning,
//
//     pred_x0 = (1 - gamma) * l / sqrt(ab) + gamma * x*(v_f)
//
// and returns the noise consistent with that belief. With gamma = 1 a DDIM
// loop lands exactly on x*, which makes the sampler testable without weights.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "pigment/error.hpp"
#include "pigment/random.hpp"
#include "pigment/scheduler.hpp"
#include "pigment/tensor.hpp"
#include "pigment/vecmix.hpp"

namespace pigment {

class Denoiser {
public:
    virtual ~Denoiser() = default;

    virtual std::string id() const = 0;
    virtual Shape latent_shape() const = 0;
    // Predicted noise for `latent` at training timestep `timestep`.
    virtual LatentTensor predict(const LatentTensor& latent, int timestep, const GuidanceVector& guidance) const = 0;
};

inline void check_prediction(const Denoiser& d, const LatentTensor& latent, const LatentTensor& eps) {
    if (!eps.same_shape(latent)) {
        throw ContractError("shape_mismatch", "denoiser '" + d.id() + "' returned " + shape_string(eps.shape()) +
                                                  " for latent " + shape_string(latent.shape()));
    }
    if (!eps.all_finite()) {
        throw NumericError("denoiser '" + d.id() + "' returned non-finite noise");
    }
}

// eps_u + s * (eps_c - eps_u), evaluated as (1 - s) eps_u + s eps_c so that
// s = 0 and s = 1 return their branch exactly.
template <std::floating_point T>
Tensor<T> cfg_combine(const Tensor<T>& eps_uncond, const Tensor<T>& eps_cond, double scale) {
    require_same_shape(eps_uncond, eps_cond, "cfg_combine");
    if (!std::isfinite(scale) || scale < 0.0) {
        throw ContractError("bad_scale", "guide scale must be finite and non-negative");
    }
    Tensor<T> out(eps_cond.shape());
    const double keep = 1.0 - scale;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<T>(keep * static_cast<double>(eps_uncond[i]) + scale * static_cast<double>(eps_cond[i]));
    }
    return out;
}

template <std::floating_point T>
Tensor<T> toy_predict(const Tensor<T>& latent, double alpha_bar, const Tensor<double>& target, double gamma) {
    if (latent.shape() != target.shape()) {
        throw ContractError("shape_mismatch", "toy_predict: latent " + shape_string(latent.shape()) +
                                                  " vs target " + shape_string(target.shape()));
    }
    Tensor<T> eps(latent.shape());
    if (alpha_bar >= 1.0) return eps;
    const double signal = std::sqrt(alpha_bar);
    const double inv_noise = 1.0 / std::sqrt(1.0 - alpha_bar);
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double l = static_cast<double>(latent[i]);
        const double pred_x0 = (1.0 - gamma) * (l / signal) + gamma * target[i];
        eps[i] = static_cast<T>((l - signal * pred_x0) * inv_noise);
    }
    return eps;
}

struct ToyDenoiserConfig {
    double gamma = 0.3;
    std::string backend_id = "toy";
};

class ToyDenoiser final : public Denoiser {
public:
    ToyDenoiser(ToyDenoiserConfig config, Shape latent_shape, Shape embedding_shape,
                NoiseSchedule schedule = build_schedule(1))
        : config_(std::move(config)),
          latent_shape_(std::move(latent_shape)),
          embedding_shape_(std::move(embedding_shape)),
          alpha_bar_(std::move(schedule.alpha_bar)) {
        if (!(config_.gamma > 0.0 && config_.gamma <= 1.0)) {
            throw ContractError("bad_gamma", "relaxation rate must lie in (0, 1]");
        }
        const std::size_t rows = element_count(latent_shape_);
        const std::size_t cols = element_count(embedding_shape_);
        // Unit-variance projection for embeddings whose token rows have unit norm.
        const double scale = 1.0 / std::sqrt(static_cast<double>(embedding_shape_.at(0)));
        NormalStream rng(stable_hash(config_.backend_id), stream_id(StreamDomain::projection));
        projection_.resize(rows * cols);
        for (auto& w : projection_) w = scale * rng.next();
    }

    std::string id() const override { return config_.backend_id; }
    Shape latent_shape() const override { return latent_shape_; }
    const ToyDenoiserConfig& config() const noexcept { return config_; }

    // x*(v_f) = tanh(W v_f), W fixed by the backend id.
    Tensor<double> target(const GuidanceVector& guidance) const {
        if (guidance.data.shape() != embedding_shape_) {
            throw ContractError("shape_mismatch", "toy denoiser expects guidance " + shape_string(embedding_shape_) +
                                                      ", got " + shape_string(guidance.data.shape()));
        }
        const std::size_t cols = guidance.data.size();
        Tensor<double> out(latent_shape_);
        const auto v = guidance.data.values();
        for (std::size_t r = 0; r < out.size(); ++r) {
            double acc = 0.0;
            const double* row = projection_.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) acc += row[c] * v[c];
            out[r] = std::tanh(acc);
        }
        return out;
    }

    LatentTensor predict(const LatentTensor& latent, int timestep, const GuidanceVector& guidance) const override {
        if (timestep < 0 || static_cast<std::size_t>(timestep) >= alpha_bar_.size()) {
            throw ContractError("bad_step", "timestep " + std::to_string(timestep) + " outside the training range");
        }
        return toy_predict(latent, alpha_bar_[static_cast<std::size_t>(timestep)], target(guidance), config_.gamma);
    }

private:
    ToyDenoiserConfig config_;
    Shape latent_shape_;
    Shape embedding_shape_;
    std::vector<double> alpha_bar_;
    std::vector<double> projection_;
};

}  // namespace pigment
