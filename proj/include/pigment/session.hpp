// SPDX-License-Identifier: Apache-2.0
#pragma once

// One generation on the canvas, driven step by step.
//
// Each step k: pin latent regions (mask_step) -> noise prediction for the
// unconditional and conditional branches -> guidance -> DDIM update. The
// result is recorded in the timeline together with the conditioning used and
// the rng checkpoint, so any prefix can be replayed exactly.
//
// Status machine:
//   idle --start--> running --stop--> stopped --resume--> running
//   running --(cursor == K)--> done
//   stopped|done --rollback(k)--> stopped
//
// A Session is not thread safe; SessionActor (gateway.hpp) owns one per
// worker and serialises every command.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pigment/backend.hpp"
#include "pigment/error.hpp"
#include "pigment/image.hpp"
#include "pigment/latentops.hpp"
#include "pigment/palette.hpp"
#include "pigment/random.hpp"
#include "pigment/scheduler.hpp"
#include "pigment/vecmix.hpp"

namespace pigment {

struct GenerationConfig {
    int steps = 50;
    double guide_scale = 7.5;
    double overcoat = 0.0;  // percent
    int single_stroke = 1;  // steps per round
    std::uint64_t init_seed = 0;
    std::uint64_t overcoat_seed = 1;

    void validate() const {
        if (steps < 1 || steps > kTrainSteps) throw ContractError("bad_config", "steps outside [1, 1000]");
        if (!std::isfinite(guide_scale) || guide_scale < 0.0) throw ContractError("bad_config", "guide scale must be >= 0");
        if (single_stroke < 1 || single_stroke > steps) {
            throw ContractError("bad_config", "single stroke must lie in [1, steps]");
        }
        OvercoatConfig{overcoat, overcoat_seed}.validate();
    }

    friend bool operator==(const GenerationConfig&, const GenerationConfig&) = default;
};

// The prompts behind the current selection, in weight order.
struct PromptMix {
    std::vector<NodeId> node_ids;
    std::vector<std::string> texts;
    MixWeights weights;

    friend bool operator==(const PromptMix&, const PromptMix&) = default;
};

inline PromptMix single_prompt(std::string text, NodeId id = "p") {
    return {{std::move(id)}, {std::move(text)}, MixWeights({1.0})};
}

inline PromptMix mix_from(const PaletteState& palette, const Selection& selection) {
    PromptMix mix{selection.members, {}, selection.weights};
    for (const auto& id : selection.members) mix.texts.push_back(palette.node(id).text);
    return mix;
}

struct SessionBackends {
    std::shared_ptr<const Embedder> embedder;
    std::shared_ptr<const Denoiser> denoiser;
    std::shared_ptr<const Codec> codec;
};

enum class SessionStatus { idle, running, stopped, done };

inline const char* status_name(SessionStatus s) {
    switch (s) {
        case SessionStatus::idle: return "idle";
        case SessionStatus::running: return "running";
        case SessionStatus::stopped: return "stopped";
        case SessionStatus::done: return "done";
    }
    return "?";
}

// Entry k holds the latent produced by step k, i.e. after k + 1 rounds.
struct TimelineEntry {
    int step = 0;
    LatentTensor latent;
    GuidanceVector guidance;
    RngCheckpoint rng;  // overcoat stream position at the start of step k
    PathPoint path;
};

struct Frame {
    int step = 0;   // index of the step that produced this frame
    int total = 0;  // K
    LatentTensor latent;
    Image preview;
};

class Session {
public:
    explicit Session(SessionBackends backends) : backends_(std::move(backends)) {
        if (!backends_.embedder || !backends_.denoiser || !backends_.codec) {
            throw ContractError("session needs an embedder, a denoiser and a codec");
        }
    }

    void start(Image canvas, Bitmap stencil, PromptMix mix, std::vector<AxisSetting> axes, GenerationConfig config) {
        if (status_ == SessionStatus::running) throw StateError("start: a generation is already running");
        config.validate();
        const auto& codec = *backends_.codec;
        if (stencil.width != canvas.width || stencil.height != canvas.height) {
            throw ContractError("resolution_mismatch", "stencil and canvas sizes differ");
        }
        auto mask = StencilMask::from_bitmap(std::move(stencil), codec.scale_factor());
        if (mask.empty()) throw ContractError("empty_stencil", "stencil selects no latent cell");
        const Shape shape = codec.latent_shape(canvas.width, canvas.height);
        if (shape != backends_.denoiser->latent_shape()) {
            throw ContractError("shape_mismatch", "canvas maps to latent " + shape_string(shape) + " but denoiser expects " +
                                                      shape_string(backends_.denoiser->latent_shape()));
        }

        // Resolve everything fallible before touching state.
        auto schedule = build_schedule(config.steps);
        auto canvas_latent = encode_canvas(codec, canvas);
        auto regions = classify_regions(downsample_any(alpha_mask(canvas), codec.scale_factor()), mask.latent_mask);
        auto uncond = GuidanceVector{embed("").data, {}, {}};
        auto guidance = resolve(mix, axes);

        config_ = config;
        schedule_ = std::move(schedule);
        canvas_ = std::move(canvas);
        stencil_ = std::move(mask);
        canvas_latent_ = std::move(canvas_latent);
        regions_ = std::move(regions);
        uncond_ = std::move(uncond);
        guidance_ = std::move(guidance);
        mix_ = std::move(mix);
        axes_ = std::move(axes);
        initial_ = initial_latent(shape, config_.init_seed);
        latent_ = initial_;
        entries_.clear();
        path_ = PathHistory{};
        cursor_ = 0;
        status_ = SessionStatus::running;
    }

    // New conditioning takes effect from the next step executed.
    void intervene(std::optional<PromptMix> mix, std::optional<std::vector<AxisSetting>> axes) {
        if (status_ != SessionStatus::running && status_ != SessionStatus::stopped) {
            throw StateError(std::string("intervene: session is ") + status_name(status_));
        }
        PromptMix next_mix = mix ? std::move(*mix) : mix_;
        std::vector<AxisSetting> next_axes = axes ? std::move(*axes) : axes_;
        auto guidance = resolve(next_mix, next_axes);
        mix_ = std::move(next_mix);
        axes_ = std::move(next_axes);
        guidance_ = std::move(guidance);
    }

    void stop() {
        if (status_ != SessionStatus::running) throw StateError(std::string("stop: session is ") + status_name(status_));
        status_ = SessionStatus::stopped;
    }

    void resume() {
        if (status_ != SessionStatus::stopped) throw StateError(std::string("resume: session is ") + status_name(status_));
        status_ = SessionStatus::running;
    }

    void rollback(int k) {
        if (status_ != SessionStatus::stopped && status_ != SessionStatus::done) {
            throw StateError(std::string("rollback: session is ") + status_name(status_));
        }
        if (k < 0 || k > cursor_) {
            throw ContractError("bad_step", "rollback to " + std::to_string(k) + " outside [0, " + std::to_string(cursor_) + "]");
        }
        if (k == cursor_) return;
        cursor_ = k;
        latent_ = k == 0 ? initial_ : entries_[static_cast<std::size_t>(k - 1)].latent;
        status_ = SessionStatus::stopped;
    }

    void undo() {
        if (cursor_ == 0) throw ContractError("bad_step", "undo: nothing to undo");
        rollback(cursor_ - 1);
    }

    // Execute step `cursor`. Atomic: on any failure the timeline is untouched
    // and the session stops at the last good step.
    Frame step() {
        if (status_ != SessionStatus::running) throw StateError(std::string("step: session is ") + status_name(status_));
        const int k = cursor_;
        const auto& denoiser = *backends_.denoiser;
        const RngCheckpoint checkpoint{config_.overcoat_seed, stream_id(StreamDomain::overcoat, static_cast<std::uint32_t>(k)), 0};

        LatentTensor next;
        try {
            NormalStream rng = NormalStream::restore(checkpoint);
            const auto masked = mask_step(latent_, canvas_latent_, regions_, k, overcoat(), schedule_, rng);
            const int t = schedule_.timestep(k);
            auto eps_cond = denoiser.predict(masked, t, guidance_);
            check_prediction(denoiser, masked, eps_cond);
            LatentTensor eps = eps_cond;
            if (config_.guide_scale != 1.0) {
                auto eps_uncond = denoiser.predict(masked, t, uncond_);
                check_prediction(denoiser, masked, eps_uncond);
                eps = cfg_combine(eps_uncond, eps_cond, config_.guide_scale);
            }
            next = ddim_step(masked, eps, k, schedule_);
        } catch (...) {
            status_ = SessionStatus::stopped;
            throw;
        }

        entries_.resize(static_cast<std::size_t>(k));
        entries_.push_back({k, next, guidance_, checkpoint, make_path_point(k, mix_.weights, mix_.node_ids, axes_)});
        path_.record(entries_.back().path);
        latent_ = std::move(next);
        cursor_ = k + 1;
        if (cursor_ == config_.steps) status_ = SessionStatus::done;
        return {k, config_.steps, latent_, preview()};
    }

    // One round: up to `single_stroke` steps, fewer if the run finishes.
    std::vector<Frame> run_round(const std::function<void(const Frame&)>& on_frame = {}) {
        std::vector<Frame> frames;
        for (int i = 0; i < config_.single_stroke && status_ == SessionStatus::running; ++i) {
            frames.push_back(step());
            if (on_frame) on_frame(frames.back());
        }
        return frames;
    }

    void run_to_end(const std::function<void(const Frame&)>& on_frame = {}) {
        while (status_ == SessionStatus::running) run_round(on_frame);
    }

    Image preview() const { return composite(latent_, *backends_.codec, stencil_, canvas_); }

    SessionStatus status() const noexcept { return status_; }
    int cursor() const noexcept { return cursor_; }
    int total_steps() const noexcept { return config_.steps; }
    const GenerationConfig& config() const noexcept { return config_; }
    const LatentTensor& latent() const noexcept { return latent_; }
    const LatentTensor& initial() const noexcept { return initial_; }
    const LatentTensor& canvas_latent() const noexcept { return canvas_latent_; }
    const RegionMap& regions() const noexcept { return regions_; }
    const StencilMask& stencil() const noexcept { return stencil_; }
    const Image& canvas() const noexcept { return canvas_; }
    const NoiseSchedule& schedule() const noexcept { return schedule_; }
    const GuidanceVector& guidance() const noexcept { return guidance_; }
    const PromptMix& mix() const noexcept { return mix_; }
    const std::vector<AxisSetting>& axes() const noexcept { return axes_; }
    const std::vector<TimelineEntry>& entries() const noexcept { return entries_; }
    const PathHistory& path() const noexcept { return path_; }
    const SessionBackends& backends() const noexcept { return backends_; }
    OvercoatConfig overcoat() const noexcept { return {config_.overcoat, config_.overcoat_seed}; }

    GuidanceVector resolve(const PromptMix& mix, const std::vector<AxisSetting>& axes) {
        if (mix.texts.size() != mix.weights.size()) {
            throw ContractError("bad_weights", "prompt mix has " + std::to_string(mix.texts.size()) + " prompts and " +
                                                   std::to_string(mix.weights.size()) + " weights");
        }
        std::vector<PromptEmbedding> parts;
        for (const auto& text : mix.texts) parts.push_back(embed(text));
        const auto base = interpolate(parts, mix.weights);
        std::vector<DirectionalAxis> directional;
        for (const auto& a : axes) {
            directional.push_back({a.id, embed(a.text_a), embed(a.text_b), a.weight, a.color_a, a.color_b});
        }
        return compose(base, directional, mix.weights);
    }

private:
    const PromptEmbedding& embed(const std::string& text) {
        auto it = embeddings_.find(text);
        if (it == embeddings_.end()) {
            auto e = backends_.embedder->embed(text);
            check_embedding(*backends_.embedder, e);
            it = embeddings_.emplace(text, std::move(e)).first;
        }
        return it->second;
    }

    SessionBackends backends_;
    std::map<std::string, PromptEmbedding> embeddings_;

    GenerationConfig config_;
    NoiseSchedule schedule_;
    Image canvas_;
    StencilMask stencil_;
    LatentTensor canvas_latent_;
    RegionMap regions_;
    GuidanceVector uncond_;
    GuidanceVector guidance_;
    PromptMix mix_;
    std::vector<AxisSetting> axes_;

    LatentTensor initial_;
    LatentTensor latent_;
    std::vector<TimelineEntry> entries_;
    PathHistory path_;
    int cursor_ = 0;
    SessionStatus status_ = SessionStatus::idle;
};

}  // namespace pigment
