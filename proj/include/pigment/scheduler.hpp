// SPDX-License-Identifier: Apache-2.0
#pragma once

// Deterministic DDIM (eta = 0) over a scaled-linear beta schedule.
//
// Step-index convention: k counts completed denoising rounds. k = 0 is the
// pure-noise latent, k = K the finished one. Step k reads the latent at noise
// level timesteps[k] and produces the latent at timesteps[k + 1]; the level
// past the last entry is the clean end, alpha_bar = 1.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <string>
#include <vector>

#include "pigment/error.hpp"
#include "pigment/random.hpp"
#include "pigment/tensor.hpp"

namespace pigment {

using LatentTensor = Tensor<float>;

inline constexpr double kBetaStart = 8.5e-4;
inline constexpr double kBetaEnd = 1.2e-2;
inline constexpr int kTrainSteps = 1000;

struct NoiseSchedule {
    double beta_start = kBetaStart;
    double beta_end = kBetaEnd;
    int train_steps = kTrainSteps;
    int inference_steps = 0;
    std::vector<double> betas;      // [train_steps]
    std::vector<double> alpha_bar;  // [train_steps], cumulative product of (1 - beta)
    std::vector<int> timesteps;     // [inference_steps], descending

    int steps() const noexcept { return inference_steps; }

    int timestep(int k) const {
        check_step(k, inference_steps - 1);
        return timesteps[static_cast<std::size_t>(k)];
    }

    // Signal fraction of the latent at step boundary k, k in [0, K].
    double alpha_bar_at_step(int k) const {
        check_step(k, inference_steps);
        return k == inference_steps ? 1.0 : alpha_bar[static_cast<std::size_t>(timesteps[k])];
    }

    void check_step(int k, int last) const {
        if (k < 0 || k > last) {
            throw ContractError("bad_step", "step " + std::to_string(k) + " outside [0, " +
                                                std::to_string(last) + "]");
        }
    }
};

inline NoiseSchedule build_schedule(int inference_steps, int train_steps = kTrainSteps,
                                    double beta_start = kBetaStart, double beta_end = kBetaEnd) {
    if (train_steps < 2) throw ContractError("bad_schedule", "need at least two training steps");
    if (inference_steps < 1 || inference_steps > train_steps) {
        throw ContractError("bad_steps", "inference steps " + std::to_string(inference_steps) +
                                             " outside [1, " + std::to_string(train_steps) + "]");
    }
    NoiseSchedule s;
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    s.train_steps = train_steps;
    s.inference_steps = inference_steps;

    const double lo = std::sqrt(beta_start);
    const double hi = std::sqrt(beta_end);
    s.betas.resize(static_cast<std::size_t>(train_steps));
    s.alpha_bar.resize(s.betas.size());
    double running = 1.0;
    for (int i = 0; i < train_steps; ++i) {
        const double r = lo + (static_cast<double>(i) / (train_steps - 1)) * (hi - lo);
        s.betas[i] = r * r;
        running *= 1.0 - s.betas[i];
        s.alpha_bar[i] = running;
    }

    // Trailing spacing: the first inference step sits on the noisiest
    // training timestep, the rest follow every T/K steps.
    s.timesteps.resize(static_cast<std::size_t>(inference_steps));
    for (int k = 0; k < inference_steps; ++k) {
        const long long num = static_cast<long long>(inference_steps - k) * train_steps;
        s.timesteps[k] = static_cast<int>(num / inference_steps) - 1;
    }
    return s;
}

// nu(l, k): noise `l` up to the level of step boundary k,
//   sqrt(ab) * l + sqrt(1 - ab) * eps,  eps ~ N(0, 1) drawn row-major from rng.
template <std::floating_point T>
Tensor<T> add_noise(const Tensor<T>& latent, int k, const NoiseSchedule& schedule, NormalStream& rng) {
    const double ab = schedule.alpha_bar_at_step(k);
    const double signal = std::sqrt(ab);
    const double noise = std::sqrt(1.0 - ab);
    Tensor<T> out(latent.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<T>(signal * static_cast<double>(latent[i]) + noise * rng.next());
    }
    return out;
}

template <std::floating_point T>
Tensor<T> predict_x0(const Tensor<T>& latent, const Tensor<T>& eps, double alpha_bar) {
    require_same_shape(latent, eps, "predict_x0");
    const double inv_signal = 1.0 / std::sqrt(alpha_bar);
    const double noise = std::sqrt(1.0 - alpha_bar);
    Tensor<T> out(latent.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<T>((static_cast<double>(latent[i]) - noise * static_cast<double>(eps[i])) *
                                inv_signal);
    }
    return out;
}

// One deterministic DDIM update from boundary k to k + 1.
template <std::floating_point T>
Tensor<T> ddim_step(const Tensor<T>& latent, const Tensor<T>& eps, int k, const NoiseSchedule& schedule) {
    require_same_shape(latent, eps, "ddim_step");
    schedule.check_step(k, schedule.steps() - 1);
    if (!eps.all_finite()) {
        throw NumericError("ddim_step: predicted noise has non-finite entries at step " + std::to_string(k));
    }
    const double ab = schedule.alpha_bar_at_step(k);
    const double ab_next = schedule.alpha_bar_at_step(k + 1);
    const double inv_signal = 1.0 / std::sqrt(ab);
    const double noise = std::sqrt(1.0 - ab);
    const double signal_next = std::sqrt(ab_next);
    const double noise_next = std::sqrt(1.0 - ab_next);
    Tensor<T> out(latent.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double e = static_cast<double>(eps[i]);
        const double x0 = (static_cast<double>(latent[i]) - noise * e) * inv_signal;
        out[i] = static_cast<T>(signal_next * x0 + noise_next * e);
    }
    return out;
}

// Seeded standard-normal latent for step 0.
inline LatentTensor initial_latent(const Shape& shape, std::uint64_t seed) {
    NormalStream rng(seed, stream_id(StreamDomain::init_noise));
    LatentTensor out(shape);
    for (auto& v : out.values()) v = static_cast<float>(rng.next());
    return out;
}

}  // namespace pigment
